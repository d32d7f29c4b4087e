"""Simulator for a cavity-mediated two-atom phase gate and multi-atom GHZ generation.

The atoms couple dispersively to one cavity mode while a classical drive rotates
them; at the right interaction time the field disentangles, so the gate works for
any field state, including thermal ones.
"""
from .analysis import (
    REFERENCE_PRESET,
    asynchronous_entry_sim,
    decay_sanity,
    delta_f1,
    delta_f2_printed,
    delta_f3,
    error_budget,
    rabi_fluctuation_sim,
    stark_shift_sim,
    thermal_sweep,
)
from .gates import (
    GateParameters,
    dicke_expansion,
    ghz_by_resummation,
    ghz_target,
    ideal_phase_gate,
    plan_gate,
    plan_ghz,
    run_ghz,
    verify_gate,
)
from .hamiltonian import (
    TimeDependentHamiltonian,
    build_effective,
    build_interaction,
    build_residual,
    build_rotated,
)
from .metrics import FidelityReport, TruncationError, state_fidelity
from .operators import HilbertSpec, QuantumState, atomic_state, fock_state, tensor, thermal_state
from .propagator import (
    ClosureWarning,
    ConvergenceError,
    IntegratorConfig,
    coefficients,
    effective_propagator,
    evolve,
    full_frame_propagator,
    lindblad_evolve,
    time_ordered_propagator,
)

__all__ = [name for name in dir() if not name.startswith("_")]
