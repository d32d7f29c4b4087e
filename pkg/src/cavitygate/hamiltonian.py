"""Hamiltonians of the driven Tavis-Cummings scheme.

Every time-dependent Hamiltonian here is a finite harmonic sum
``H(t) = sum_k exp(i w_k t) O_k`` and is exposed as an evaluation map.
The lab-frame Hamiltonian is never built; the starting point is the
interaction picture with respect to ``w0 Sz + wa a+a`` with the drive
resonant with the atoms.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import sparse

from .operators import HilbertSpec, annihilation, atomic_operator, collective, collective_sx


@dataclass(frozen=True)
class TimeDependentHamiltonian:
    spec: HilbertSpec
    evaluate: Callable[[float], np.ndarray]
    label: str
    # (frequency, operator) pairs when H is a harmonic sum; None for arbitrary maps
    terms: tuple[tuple[float, np.ndarray], ...] | None = field(default=None, repr=False)
    # times where H jumps; integrators never step across them
    breakpoints: tuple[float, ...] = ()
    # fast t, y -> H(t) @ y; integrators use it when present
    action: Callable[[float, np.ndarray], np.ndarray] | None = field(default=None, repr=False)

    def __call__(self, t: float) -> np.ndarray:
        return self.evaluate(t)

    def apply(self, t: float, y: np.ndarray) -> np.ndarray:
        if self.action is not None:
            return self.action(t, y)
        return self.evaluate(t) @ y

    @property
    def dim(self) -> int:
        return self.spec.dim


def harmonic(spec: HilbertSpec, terms, label: str) -> TimeDependentHamiltonian:
    """Wrap ``[(w, O), ...]`` as ``t -> sum exp(i w t) O``; zero-frequency terms are merged."""
    static = sum((op for w, op in terms if w == 0), np.zeros((spec.dim, spec.dim), complex))
    moving = [(float(w), op) for w, op in terms if w != 0]
    freqs = np.array([w for w, _ in moving])
    ops = np.array([op for _, op in moving]) if moving else np.zeros((0, spec.dim, spec.dim), complex)

    # the couplings are banded: the integrator-facing action reuses one CSR matrix
    # on the union sparsity pattern and only refreshes its data array
    pattern = sparse.csr_matrix((np.abs(static) + sum(np.abs(op) for op in ops)) > 0, dtype=complex)
    rows = np.repeat(np.arange(spec.dim), np.diff(pattern.indptr))
    static_data = static[rows, pattern.indices]
    moving_data = np.array([op[rows, pattern.indices] for op in ops]).reshape(len(ops), len(rows))
    work = pattern.copy()

    def evaluate(t: float) -> np.ndarray:
        H = static.copy()
        for f, op in zip(np.exp(1j * freqs * t), ops):
            H += f * op
        return H

    def action(t: float, y: np.ndarray) -> np.ndarray:
        work.data[:] = static_data + np.exp(1j * freqs * t) @ moving_data
        return work @ y

    return TimeDependentHamiltonian(spec, evaluate, label, tuple([(0.0, static)] + moving), action=action)


def constant(spec: HilbertSpec, H: np.ndarray, label: str = "constant") -> TimeDependentHamiltonian:
    return harmonic(spec, [(0.0, H)], label)


def build_interaction(spec: HilbertSpec) -> TimeDependentHamiltonian:
    """Interaction-picture Hamiltonian with the classical drive.

    ``H_i(t) = sum_j (g/2)(e^{-i delta t} a+ S-_j + e^{i delta t} a S+_j) + (Omega/2)(S+_j + S-_j)``
    """
    a = annihilation(spec)
    ad = a.conj().T
    lower = (spec.g / 2) * ad @ collective(spec, "S-")
    drive = spec.omega_rabi * collective_sx(spec)
    return harmonic(
        spec,
        [(-spec.delta, lower), (spec.delta, lower.conj().T), (0.0, drive)],
        "interaction",
    )


def build_drive_frame(spec: HilbertSpec) -> np.ndarray:
    """``H0 = Omega sum_j sigma_z,j``; equal to ``Omega S_x`` as a matrix."""
    return spec.omega_rabi * collective(spec, "sigmaz")


def _field_quadrature_terms(spec: HilbertSpec, atomic: np.ndarray):
    # (g/2)(e^{-i delta t} a+ + e^{i delta t} a) X
    a = annihilation(spec)
    c = spec.g / 2
    return [(-spec.delta, c * a.conj().T @ atomic), (spec.delta, c * a @ atomic)]


def _rotated_terms(spec: HilbertSpec):
    # In the |+>,|-> basis, S-_j = sigma_z,j - sigma+_j/2 + sigma-_j/2 and S+_j is
    # its adjoint; sigma+ picks up e^{+i Omega t} in the drive frame.
    sz = collective(spec, "sigmaz")
    sp = collective(spec, "sigma+")
    sm = collective(spec, "sigma-")
    a = annihilation(spec)
    ad = a.conj().T
    c = spec.g / 2
    d, om = spec.delta, spec.omega_rabi
    effective = [(-d, c * ad @ sz), (d, c * a @ sz)]
    residual = [
        (om - d, -0.5 * c * ad @ sp),
        (-om - d, 0.5 * c * ad @ sm),
        (-om + d, -0.5 * c * a @ sm),
        (om + d, 0.5 * c * a @ sp),
    ]
    return effective, residual


def build_rotated(spec: HilbertSpec) -> TimeDependentHamiltonian:
    """Hamiltonian in the frame rotating with ``H0`` (no approximation)."""
    effective, residual = _rotated_terms(spec)
    return harmonic(spec, effective + residual, "rotated")


def build_effective(spec: HilbertSpec) -> TimeDependentHamiltonian:
    """``H_eff(t) = (g/2)(e^{-i delta t} a+ + e^{i delta t} a) sum_j sigma_z,j``."""
    effective, _ = _rotated_terms(spec)
    return harmonic(spec, effective, "effective")


def build_residual(spec: HilbertSpec) -> TimeDependentHamiltonian:
    """The fast-oscillating terms dropped from the rotated Hamiltonian."""
    _, residual = _rotated_terms(spec)
    return harmonic(spec, residual, "residual")


def build_effective_lab(spec: HilbertSpec) -> TimeDependentHamiltonian:
    """``H0 + H_eff(t)``: the effective model expressed in the interaction frame.

    Valid because ``H0`` commutes with ``H_eff``; its propagator is
    ``e^{-i H0 t} U'(t)``.
    """
    return harmonic(
        spec,
        [(0.0, build_drive_frame(spec))] + _field_quadrature_terms(spec, collective(spec, "sigmaz")),
        "effective-lab",
    )


def build_windowed(spec: HilbertSpec, windows, model: str = "full") -> TimeDependentHamiltonian:
    """Interaction-frame Hamiltonian where atom ``j`` only couples during ``windows[j-1]``.

    ``windows`` is a sequence of ``(t_on, t_off)`` pairs, one per atom. Outside
    its window an atom is decoupled from both the cavity and the drive.
    ``model='full'`` uses the exact couplings, ``'effective'`` the
    ``Omega sigma_z + (g/2)(...) sigma_z`` form.
    """
    if len(windows) != spec.n_atoms:
        raise ValueError("need one (t_on, t_off) window per atom")
    per_atom = []
    for j in range(1, spec.n_atoms + 1):
        if model == "full":
            sm = atomic_operator(spec, j, "S-")
            a = annihilation(spec)
            lower = (spec.g / 2) * a.conj().T @ sm
            terms = [(-spec.delta, lower), (spec.delta, lower.conj().T),
                     (0.0, spec.omega_rabi * 0.5 * (sm + sm.conj().T))]
        elif model == "effective":
            sz = atomic_operator(spec, j, "sigmaz")
            terms = [(0.0, spec.omega_rabi * sz)] + _field_quadrature_terms(spec, sz)
        else:
            raise ValueError(f"unknown model {model!r}")
        per_atom.append(harmonic(spec, terms, f"atom{j}"))

    def evaluate(t: float) -> np.ndarray:
        H = np.zeros((spec.dim, spec.dim), complex)
        for (t_on, t_off), h in zip(windows, per_atom):
            if t_on <= t < t_off:
                H += h(t)
        return H

    def action(t: float, y: np.ndarray) -> np.ndarray:
        out = np.zeros_like(y, dtype=complex)
        for (t_on, t_off), h in zip(windows, per_atom):
            if t_on <= t < t_off:
                out += h.apply(t, y)
        return out

    edges = sorted({t for w in windows for t in w})
    return TimeDependentHamiltonian(
        spec, evaluate, f"windowed-{model}", breakpoints=tuple(edges), action=action
    )
