"""Analytic and numerical propagators.

The analytic part is the disentangled form of the effective evolution,

    U'(t) = exp(-i A S_x^2) exp(-i B S_x a) exp(-i C S_x a+),

together with the drive-frame factor ``exp(-i H0 t)``. The numerical part is a
fixed-step classical Runge-Kutta integrator with step-doubling refinement, used
both as an independent oracle and for models that have no closed form, plus a
Lindblad integrator for cavity damping.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.linalg import expm

from .hamiltonian import TimeDependentHamiltonian, build_effective, harmonic
from .operators import (
    HilbertSpec,
    QuantumState,
    atomic_sx,
    field_annihilation,
)

MAX_PROPAGATOR_DIM = 4096


class ConvergenceError(RuntimeError):
    """Step refinement did not reach the requested tolerance."""


class ClosureWarning(UserWarning):
    """The closed ``S_x``-only propagator was requested away from ``delta t = 2 pi k``."""


@dataclass(frozen=True)
class PropagatorCoefficients:
    A: complex
    B: complex
    C: complex
    lam: float


def coefficients(spec: HilbertSpec, t: float) -> PropagatorCoefficients:
    """Closed-form coefficients of the disentangled effective propagator."""
    g, d = spec.g, spec.delta
    if d == 0:
        raise ValueError("delta = 0 is not supported by the closed-form coefficients")
    # expm1 keeps small-t values accurate
    B = g / (2j * d) * np.expm1(1j * d * t)
    C = -g / (2j * d) * np.expm1(-1j * d * t)
    lam = g**2 / (4 * d)
    A = lam * (t + np.expm1(-1j * d * t) / (1j * d))
    return PropagatorCoefficients(complex(A), complex(B), complex(C), float(lam))


def closure_order(spec: HilbertSpec, t: float, atol: float = 1e-9) -> int | None:
    """``k`` if ``delta t = 2 pi k`` within ``atol`` (relative to 2 pi), else ``None``."""
    x = spec.delta * t / (2 * np.pi)
    k = round(x)
    return k if abs(x - k) <= atol else None


def _sx_eigen(n_atoms: int):
    m, V = np.linalg.eigh(atomic_sx(n_atoms).real)
    return np.round(2 * m) / 2, V


def _field_block(coef: PropagatorCoefficients, m: float, cutoff: int, pad: int) -> np.ndarray:
    a = field_annihilation(cutoff + pad)
    block = np.exp(-1j * coef.A * m * m) * expm(-1j * coef.B * m * a) @ expm(-1j * coef.C * m * a.conj().T)
    return block[:cutoff, :cutoff]


def effective_propagator(spec: HilbertSpec, t: float, pad: int | None = None, tol: float = 1e-13) -> np.ndarray:
    """Disentangled propagator of the effective Hamiltonian on ``spec``'s space.

    The two displacement-like factors are not unitary on their own and their
    product only equals the true propagator on an untruncated mode, so each
    ``S_x`` block is evaluated in a Fock space padded by ``pad`` extra levels
    and projected back. With ``pad=None`` the padding is doubled until the
    projected block changes by less than ``tol``.
    """
    if spec.dim > MAX_PROPAGATOR_DIM:
        raise MemoryError(f"propagator dimension {spec.dim} exceeds {MAX_PROPAGATOR_DIM}")
    coef = coefficients(spec, t)
    m_vals, V = _sx_eigen(spec.n_atoms)
    cut = spec.fock_cutoff
    blocks = {}
    for m in np.unique(m_vals):
        if pad is not None:
            blocks[m] = _field_block(coef, m, cut, pad)
            continue
        p = 16
        cur = _field_block(coef, m, cut, p)
        for _ in range(8):
            nxt = _field_block(coef, m, cut, 2 * p)
            done = np.max(np.abs(nxt - cur)) < tol
            cur, p = nxt, 2 * p
            if done:
                break
        else:
            raise ConvergenceError("Fock padding for the disentangled propagator did not converge")
        blocks[m] = cur
    U = np.zeros((spec.dim, spec.dim), complex)
    for k, m in enumerate(m_vals):
        v = V[:, k]
        U += np.kron(np.outer(v, v), blocks[m])
    return U


def atomic_phase_operator(n_atoms: int, sx_phase: float, sx2_phase: float) -> np.ndarray:
    """``exp(-i (sx_phase S_x + sx2_phase S_x^2))`` on the atoms, by eigendecomposition."""
    m, V = _sx_eigen(n_atoms)
    return (V * np.exp(-1j * (sx_phase * m + sx2_phase * m * m))) @ V.T


def full_frame_propagator(spec: HilbertSpec, t: float) -> np.ndarray:
    """``exp(-i H0 t) U'(t)``.

    At ``delta t = 2 pi k`` this is checked against the closed form
    ``exp(-i (Omega t S_x + lambda t S_x^2)) (x) 1``. Elsewhere the product form is
    returned and a :class:`ClosureWarning` is emitted.
    """
    eye_f = np.eye(spec.fock_cutoff)
    frame = np.kron(atomic_phase_operator(spec.n_atoms, spec.omega_rabi * t, 0.0), eye_f)
    U = frame @ effective_propagator(spec, t)
    if closure_order(spec, t) is None:
        warnings.warn(
            f"delta*t = {spec.delta * t:.6g} is not a multiple of 2 pi; atoms and field stay entangled",
            ClosureWarning,
            stacklevel=2,
        )
        return U
    lam = spec.g**2 / (4 * spec.delta)
    closed = np.kron(atomic_phase_operator(spec.n_atoms, spec.omega_rabi * t, lam * t), eye_f)
    dev = np.max(np.abs(U - closed))
    if dev > 1e-10:
        raise ArithmeticError(f"product and closed-form propagators differ by {dev:.3e}")
    return U


# ------------------------------------------------------------------ integrators


@dataclass(frozen=True)
class IntegratorConfig:
    """``method='rk4'`` runs once at ``step``; ``'adaptive'`` doubles the step
    count until two successive results differ by less than ``tol``."""

    method: str = "adaptive"
    step: float | None = None
    tol: float = 1e-8
    max_dim: int = MAX_PROPAGATOR_DIM
    max_refinements: int = 10

    def __post_init__(self):
        if self.method not in ("rk4", "adaptive"):
            raise ValueError(f"unknown integrator method {self.method!r}")
        if self.step is not None and not self.step > 0:
            raise ValueError("step must be positive")
        if not 0 < self.tol <= 1e-4:
            raise ValueError("tol must lie in (0, 1e-4]")


def default_step(spec: HilbertSpec) -> float:
    """40 samples per drive period, or 200 per detuning period without drive."""
    if spec.omega_rabi > 0:
        return 2 * np.pi / spec.omega_rabi / 40
    if spec.delta != 0:
        return 2 * np.pi / abs(spec.delta) / 200
    return 2 * np.pi / spec.g / 200


@dataclass
class Propagation:
    y: np.ndarray
    steps: int
    refinements: int
    max_leakage: float
    change: float


def _segments(t0: float, t1: float, breakpoints) -> list[tuple[float, float]]:
    cuts = [t0] + [b for b in sorted(breakpoints) if t0 < b < t1] + [t1]
    return list(zip(cuts[:-1], cuts[1:]))


def _rk4(rhs, y, t0, t1, dt, breakpoints, monitor=None):
    steps = 0
    peak = monitor(y) if monitor else 0.0
    for s0, s1 in _segments(t0, t1, breakpoints):
        n = max(1, math.ceil((s1 - s0) / dt - 1e-9))
        h = (s1 - s0) / n
        # keep stage times strictly inside the segment so jumps are seen from one side
        eps = 1e-12 * max(1.0, abs(s1 - s0)) if breakpoints else 0.0

        def clamp(t):
            return min(max(t, s0 + eps), s1 - eps)

        for i in range(n):
            t = s0 + i * h
            k1 = rhs(clamp(t), y)
            k2 = rhs(clamp(t + h / 2), y + (h / 2) * k1)
            k3 = rhs(clamp(t + h / 2), y + (h / 2) * k2)
            k4 = rhs(clamp(t + h), y + h * k3)
            y = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
            if monitor:
                peak = max(peak, monitor(y))
        steps += n
    return y, steps, peak


def _refine(rhs, y0, t0, t1, dt0, cfg: IntegratorConfig, breakpoints, monitor):
    dt = cfg.step or dt0
    y, steps, peak = _rk4(rhs, y0, t0, t1, dt, breakpoints, monitor)
    if cfg.method == "rk4":
        return Propagation(y, steps, 0, peak, float("nan"))
    change = float("inf")
    for r in range(1, cfg.max_refinements + 1):
        dt /= 2
        y_new, steps, peak = _rk4(rhs, y0, t0, t1, dt, breakpoints, monitor)
        change = float(np.max(np.abs(y_new - y)))
        y = y_new
        if change < cfg.tol:
            return Propagation(y, steps, r, peak, change)
    raise ConvergenceError(
        f"no convergence to {cfg.tol:g} after {cfg.max_refinements} step doublings (last change {change:.3e})"
    )


def _top_levels_monitor(spec: HilbertSpec, weights=None, levels: int = 2):
    cut = spec.fock_cutoff

    def monitor(y):
        amp = y.reshape(spec.atom_dim, cut, -1)[:, cut - levels:, :]
        per_col = np.sum(np.abs(amp) ** 2, axis=(0, 1))
        return float(np.max(weights @ per_col)) if weights is not None else float(per_col.max())

    return monitor


def propagate(
    H: TimeDependentHamiltonian,
    columns: np.ndarray,
    t_final: float,
    cfg: IntegratorConfig = IntegratorConfig(),
    t0: float = 0.0,
    weights: np.ndarray | None = None,
    track_leakage: bool = False,
) -> Propagation:
    """Integrate ``i dY/dt = H(t) Y`` for a block of state columns.

    With ``track_leakage`` the result carries the largest population seen in the
    top two Fock levels: the worst column, or the worst row of ``weights @ pops``
    when a ``(groups, columns)`` weight matrix is given (e.g. mixtures).
    """
    Y = np.asarray(columns, dtype=complex)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.shape[0] != H.dim:
        raise ValueError(f"state dimension {Y.shape[0]} does not match Hamiltonian dimension {H.dim}")

    def rhs(t, y):
        return -1j * H.apply(t, y)

    monitor = _top_levels_monitor(H.spec, weights) if track_leakage else None
    return _refine(rhs, Y, t0, t_final, default_step(H.spec), cfg, H.breakpoints, monitor)


def evolve(
    H: TimeDependentHamiltonian,
    state0: QuantumState,
    t_final: float,
    cfg: IntegratorConfig = IntegratorConfig(),
    t0: float = 0.0,
) -> QuantumState:
    """Time-ordered Schrodinger evolution of a pure or mixed state from ``t0`` to ``t_final``."""
    if state0.dim != H.dim:
        raise ValueError(f"state dimension {state0.dim} does not match Hamiltonian dimension {H.dim}")
    if state0.is_pure:
        y = propagate(H, state0.data, t_final, cfg, t0).y[:, 0]
        return QuantumState(y, "pure", state0.dims)
    p, vecs = np.linalg.eigh(state0.data)
    keep = p > 1e-14
    y = propagate(H, vecs[:, keep], t_final, cfg, t0).y
    return QuantumState((y * p[keep]) @ y.conj().T, "mixed", state0.dims)


def time_ordered_propagator(
    H: TimeDependentHamiltonian,
    t_final: float,
    cfg: IntegratorConfig = IntegratorConfig(),
    t0: float = 0.0,
    columns: np.ndarray | None = None,
) -> np.ndarray:
    """Numerical propagator (or the listed columns of it), integrated column by column."""
    if H.dim > cfg.max_dim:
        raise MemoryError(f"propagator dimension {H.dim} exceeds {cfg.max_dim}; evolve states instead")
    eye = np.eye(H.dim, dtype=complex)
    Y = eye if columns is None else eye[:, columns]
    return propagate(H, Y, t_final, cfg, t0).y


def lindblad_evolve(
    H: TimeDependentHamiltonian,
    rho0: QuantumState | np.ndarray,
    kappa: float,
    nbar_bath: float,
    t_final: float,
    cfg: IntegratorConfig = IntegratorConfig(),
    t0: float = 0.0,
    track_leakage: bool = False,
):
    """Master equation with cavity damping.

    ``drho/dt = -i[H, rho] + kappa (1 + nbar) D[a] rho + kappa nbar D[a+] rho``.
    Accepts one :class:`QuantumState` (returns one) or a stack of density
    matrices of shape ``(k, d, d)`` (returns a :class:`Propagation`).
    """
    if kappa < 0 or nbar_bath < 0:
        raise ValueError("kappa and nbar_bath must be non-negative")
    single = isinstance(rho0, QuantumState)
    if single:
        if rho0.dim != H.dim:
            raise ValueError("state dimension does not match Hamiltonian dimension")
        R = rho0.density()[None]
    else:
        R = np.asarray(rho0, dtype=complex)
    spec = H.spec
    d = H.dim
    a = sparse.csr_matrix(np.kron(np.eye(spec.atom_dim), field_annihilation(spec.fock_cutoff)))
    jumps = [(kappa * (1 + nbar_bath), a), (kappa * nbar_bath, a.conj().T.tocsr())]
    jumps = [(rate, L, (L.conj().T @ L).tocsr()) for rate, L in jumps if rate > 0]

    # rho stays Hermitian, so every right product is the adjoint of a left product
    def left(op, r):
        cols = r.transpose(1, 0, 2).reshape(d, -1)
        return (op(cols)).reshape(d, len(r), d).transpose(1, 0, 2)

    def dag(x):
        return x.conj().transpose(0, 2, 1)

    def rhs(t, r):
        hr = left(lambda y: H.apply(t, y), r)
        out = -1j * (hr - dag(hr))
        for rate, L, LdL in jumps:
            lr = left(lambda y: L @ y, r)
            lrl = left(lambda y: L @ y, dag(lr))
            x = left(lambda y: LdL @ y, r)
            out = out + rate * (lrl - 0.5 * (x + dag(x)))
        return out

    monitor = None
    if track_leakage:
        top = np.zeros(H.dim)
        top.reshape(spec.atom_dim, spec.fock_cutoff)[:, -2:] = 1

        def monitor(r):
            return float(np.max(np.real(np.einsum("kii,i->k", r, top))))

    res = _refine(rhs, R, t0, t_final, default_step(spec), cfg, H.breakpoints, monitor)
    if single:
        rho = res.y[0]
        return QuantumState((rho + rho.conj().T) / 2, "mixed", rho0.dims)
    return res


def oracle_cutoff(n_atoms: int, cutoff: int, delta: float, g: float = 1.0) -> int:
    """Fock cutoff that keeps the displaced states of the compared block untruncated."""
    alpha = (n_atoms / 2) * g / abs(delta)
    return int(math.ceil((math.sqrt(cutoff) + alpha) ** 2)) + 16


def propagator_deviation(n_atoms: int, cutoff: int, delta: float, t: float, integ: IntegratorConfig):
    """Max entry deviation between the disentangled and integrated propagators.

    Both are compared on the ``cutoff`` block; the integration runs in a larger Fock
    space so that its own truncation does not enter the comparison. The atoms are
    rotated to the ``S_x`` eigenbasis first, which only makes the matrices sparser.
    """
    spec = HilbertSpec(n_atoms, cutoff, 1.0, delta, 0.0)
    big = oracle_cutoff(n_atoms, cutoff, delta)
    bspec = spec.with_cutoff(big)
    W = np.kron(_sx_eigen(n_atoms)[1], np.eye(big))
    terms = []
    for w, op in build_effective(bspec).terms:
        rot = W.T @ op @ W
        rot[np.abs(rot) < 1e-14] = 0
        terms.append((w, rot))
    H = harmonic(bspec, terms, "effective-sx-basis")
    cols = [a * big + k for a in range(spec.atom_dim) for k in range(cutoff)]
    res = propagate(H, W.T[:, cols].astype(complex), t, integ)
    Y = (W @ res.y).reshape(spec.atom_dim, big, -1)[:, :cutoff, :].reshape(spec.dim, spec.dim)
    return float(np.max(np.abs(Y - effective_propagator(spec, t)))), big, res.steps
