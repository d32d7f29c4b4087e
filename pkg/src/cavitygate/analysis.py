"""Error budget, thermal sweeps and truncation diagnostics."""
from __future__ import annotations

import dataclasses
import math

import numpy as np

from .gates import (
    GateParameters,
    _field_components,
    _guard,
    atomic_outputs,
    ideal_atomic_evolution,
    plan_gate,
    plan_ghz,
    run_ghz,
    verify_gate,
)
from .hamiltonian import build_windowed
from .metrics import FidelityReport
from .operators import QuantumState, atomic_ket, fock_state, thermal_state
from .propagator import IntegratorConfig, propagate

# coupling and photon lifetime of the microwave-cavity experiment used for the timescale check
REFERENCE_PRESET = {"g_over_2pi_khz": 50.0, "photon_decay_time_s": 1e-3}


def delta_f1(g: float, delta: float, omega: float, t: float) -> float:
    """Stark-shift fidelity loss estimate ``1 - {1 + cos[g^2 t / (5 Omega)]}^2 / 4``.

    ``delta`` only enters through the choice of ``t``; it is accepted so the
    call mirrors the other error terms.
    """
    if min(g, delta, omega, t) <= 0:
        raise ValueError("delta_f1 needs positive g, delta, omega and t")
    return 1 - 0.25 * (1 + math.cos(g**2 * t / (5 * omega))) ** 2


def delta_f3(omega: float, t: float, epsilon: float = 0.01) -> float:
    """Loss from a relative Rabi-frequency error ``epsilon``: ``sin^2(epsilon Omega t / 2)``."""
    return math.sin(epsilon * omega * t / 2) ** 2


def delta_f2_printed(omega: float, lam: float, t: float, epsilon: float = 0.01) -> dict[str, float]:
    """The two-term asynchronous-entry estimate, evaluated literally.

    The second term ``sin^2(0.91 lambda t)`` is close to 1 at ``lambda t = pi/2``,
    so the total cannot match a small loss; it is reported, never relied on.
    """
    first = math.sin(epsilon * omega * t / 2) ** 2
    second = math.sin(0.91 * lam * t) ** 2
    return {"printed_term1": first, "printed_term2": second, "printed_total": first + second}


def two_atom_entangling_params(omega_ratio: float = 5.0) -> GateParameters:
    """Parameters for making a two-atom GHZ state (drive phase a multiple of 2 pi)."""
    return plan_ghz(2, 1.0, omega_ratio)


def _ideal_from(params: GateParameters, n_atoms: int, labels: str) -> np.ndarray:
    return ideal_atomic_evolution(n_atoms, params) @ atomic_ket(labels)


def asynchronous_entry_sim(
    params: GateParameters,
    advance_fraction: float = 0.01,
    model: str = "full",
    field_state: QuantumState | None = None,
    cfg: IntegratorConfig | None = None,
) -> FidelityReport:
    """Two atoms prepared in ``|gg>``; atom 1 enters ``advance_fraction * t`` early.

    Atom 1 couples during ``[-eps t, (1 - eps) t]``, atom 2 during ``[0, t]``. The
    final atomic state is compared with the ideal synchronous outcome
    ``exp(-i(Omega t S_x + lambda t S_x^2))|gg>``. ``delta_f['simulated']`` is the
    loss relative to the synchronous run of the same model.
    """
    if not 0 <= advance_fraction < 0.5:
        raise ValueError("advance_fraction must lie in [0, 0.5)")
    field_state = field_state or fock_state(12, 0)
    cfg = cfg or IntegratorConfig(tol=1e-7)
    spec = params.spec(2, field_state.dim)
    t = params.t_units
    lead = advance_fraction * t
    H = build_windowed(spec, [(-lead, t - lead), (0.0, t)], model)
    target = _ideal_from(params, 2, "gg")

    def final_fidelity(hamiltonian, t0):
        w, comps = _field_components(field_state)
        cols = np.kron(atomic_ket("gg")[:, None], comps)
        res = propagate(hamiltonian, cols, t, cfg, t0=t0, weights=w[None, :], track_leakage=True)
        block = res.y.reshape(4, field_state.dim, -1)
        rho = np.einsum("afc,bfc,c->ab", block, block.conj(), w)
        return float(np.real(np.vdot(target, rho @ target))), res.max_leakage

    f_async, leak = final_fidelity(H, -lead)
    f_sync, _ = final_fidelity(build_windowed(spec, [(0.0, t), (0.0, t)], model), 0.0)
    _guard(leak, 1e-3)
    printed = delta_f2_printed(params.omega_rabi, params.g**2 / (4 * params.delta), params.t, advance_fraction)
    report = FidelityReport(
        label=f"async-{model}",
        fidelity=f_async,
        per_input={"synchronous": f_sync, "asynchronous": f_async},
        delta_f={"simulated": f_sync - f_async, "raw_loss": 1 - f_async, **printed},
        truncation_leakage=leak,
        parameters={**params.as_dict(), "advance_fraction": advance_fraction, "model": model,
                    "fock_cutoff": field_state.dim},
    )
    report.check()
    return report


def rabi_fluctuation_sim(
    params: GateParameters,
    epsilon: float = 0.01,
    model: str = "full",
    field_state: QuantumState | None = None,
    cfg: IntegratorConfig | None = None,
) -> FidelityReport:
    """Two-atom entangling run with the drive scaled by ``1 + epsilon``.

    The target stays the ideal outcome of the nominal drive; ``delta_f['simulated']``
    is the loss relative to the nominal run of the same model.
    """
    field_state = field_state or fock_state(12, 0)
    target = _ideal_from(params, 2, "gg")
    off = dataclasses.replace(params, omega_rabi=params.omega_rabi * (1 + epsilon), family="custom")
    fids = {}
    leak = 0.0
    for name, p in (("nominal", params), ("scaled", off)):
        rhos, lk = atomic_outputs(p.spec(2, field_state.dim), p.t_units, [atomic_ket("gg")],
                                  field_state, model, cfg or IntegratorConfig(tol=1e-7))
        fids[name] = float(np.real(np.vdot(target, rhos[0] @ target)))
        leak = max(leak, lk)
    formula = delta_f3(params.omega_rabi, params.t, epsilon)
    report = FidelityReport(
        label=f"rabi-{model}",
        fidelity=fids["scaled"],
        per_input=fids,
        delta_f={"simulated": fids["nominal"] - fids["scaled"], "formula": formula},
        truncation_leakage=leak,
        parameters={**params.as_dict(), "epsilon": epsilon, "model": model, "fock_cutoff": field_state.dim},
    )
    report.check()
    return report


def stark_shift_sim(
    params: GateParameters,
    field_state: QuantumState | None = None,
    cfg: IntegratorConfig | None = None,
) -> FidelityReport:
    """Two-atom entangling run under the full Hamiltonian; loss vs the printed estimate."""
    field_state = field_state or fock_state(12, 0)
    rep = run_ghz(2, params.omega_ratio, field_state, "full", cfg or IntegratorConfig(tol=1e-7), params=params)
    rep.label = "stark-full"
    rep.delta_f = {
        "simulated": 1 - rep.fidelity,
        "formula": delta_f1(params.g, params.delta, params.omega_rabi, params.t),
    }
    return rep


def error_budget(
    omega_ratio: float = 5.0,
    epsilon: float = 0.01,
    cutoff: int = 12,
    cfg: IntegratorConfig | None = None,
    simulate: bool = True,
) -> list[FidelityReport]:
    """Printed estimates and simulated counterparts for the three error sources.

    The two-atom entangling run at ``Omega = omega_ratio * g`` uses drive phase
    ``2 n pi`` (admissible for even-N GHZ generation). ``delta_f3`` is also
    evaluated at the nearest phase-gate drive ``(2k + 1/2) pi``.
    """
    ent = two_atom_entangling_params(omega_ratio)
    gate_t = 2 * np.pi / ent.g
    k = max(0, round((ent.omega_t / np.pi - 0.5) / 2))
    gate_omega_t = (2 * k + 0.5) * np.pi
    formula = FidelityReport(
        label="formulas",
        fidelity=float("nan"),
        delta_f={
            "delta_f1": delta_f1(ent.g, ent.delta, ent.omega_rabi, ent.t),
            "delta_f3_entangling": delta_f3(ent.omega_rabi, ent.t, epsilon),
            "delta_f3_gate_admissible": delta_f3(gate_omega_t / gate_t, gate_t, epsilon),
            **delta_f2_printed(ent.omega_rabi, ent.g**2 / (4 * ent.delta), ent.t, epsilon),
        },
        parameters={**ent.as_dict(), "epsilon": epsilon, "gate_omega_t_over_pi": gate_omega_t / np.pi},
    )
    reports = [formula]
    if simulate:
        vac = fock_state(cutoff, 0)
        reports.append(stark_shift_sim(ent, vac, cfg))
        reports.append(asynchronous_entry_sim(ent, epsilon, "full", vac, cfg))
        reports.append(rabi_fluctuation_sim(ent, epsilon, "full", vac, cfg))
    return reports


def thermal_sweep(
    params: GateParameters,
    nbar_list,
    model: str = "effective",
    cutoff: int = 16,
    cfg: IntegratorConfig | None = None,
    executor=None,
) -> list[FidelityReport]:
    """Gate verification for each mean photon number, in input order.

    The cutoff for each point is at least ``max(cutoff, 10, ceil(8 nbar))``. A
    :class:`TruncationError` aborts the sweep if leakage exceeds ``1e-3``.
    ``executor`` (anything with an order-preserving ``map``) may run points in
    parallel.
    """
    nbars = list(nbar_list)
    if any(n < 0 for n in nbars):
        raise ValueError("mean photon numbers must be non-negative")

    def point(nbar):
        cut = max(cutoff, 10, math.ceil(8 * nbar))
        rep = verify_gate(params, thermal_state(cut, nbar), model, cfg)
        rep.label = f"thermal-{model}"
        return rep

    mapper = executor.map if executor is not None else map
    return list(mapper(point, nbars))


def truncation_check(populations) -> float:
    """Largest top-two-level population over a trajectory (the leakage metric)."""
    pops = np.asarray(populations, dtype=float)
    return float(pops.max()) if pops.size else 0.0


def cutoff_convergence(run, cutoff: int, threshold: float = 1e-4) -> dict:
    """Repeat ``run(cutoff)`` at twice the cutoff; flag under-truncation.

    ``run`` maps a cutoff to a :class:`FidelityReport`.
    """
    a, b = run(cutoff), run(2 * cutoff)
    change = abs(a.fidelity - b.fidelity)
    return {"cutoff": cutoff, "fidelity": a.fidelity, "fidelity_doubled": b.fidelity,
            "change": change, "under_truncated": change >= threshold}


def decay_rate_from_preset(g_over_2pi_khz: float, photon_decay_time_s: float) -> float:
    """Cavity decay rate in units of ``g``: ``kappa / g = 1 / (T_c g)``."""
    g = 2 * np.pi * g_over_2pi_khz * 1e3
    return 1.0 / (photon_decay_time_s * g)


def interaction_time_s(g_over_2pi_khz: float) -> float:
    """Physical gate time ``2 pi / g``."""
    return 1.0 / (g_over_2pi_khz * 1e3)


def decay_sanity(
    omega_ratio: float = 50.0,
    preset: dict = REFERENCE_PRESET,
    nbar_bath: float = 0.0,
    cutoff: int = 10,
    cfg: IntegratorConfig | None = None,
) -> FidelityReport:
    """Gate fidelity with cavity damping at the preset's ``kappa``, against the closed system."""
    params = plan_gate(1.0, omega_ratio)
    kappa = decay_rate_from_preset(**preset)
    field = thermal_state(cutoff, nbar_bath)
    # 40 steps per drive period plus one doubling already leaves ~1e-5 fidelity error
    cfg = cfg or IntegratorConfig(tol=1e-4)
    damped = verify_gate(params, field, "lindblad", cfg, kappa=kappa, nbar_bath=nbar_bath)
    closed = verify_gate(params, field, "full", cfg)
    damped.label = "decay"
    damped.delta_f = {
        "decay_loss": closed.fidelity - damped.fidelity,
        "closed_fidelity": closed.fidelity,
        "kappa_t": kappa * params.t_units,
    }
    damped.parameters.update(preset)
    damped.parameters["interaction_time_s"] = interaction_time_s(preset["g_over_2pi_khz"])
    return damped
