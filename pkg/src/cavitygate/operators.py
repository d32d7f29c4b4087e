"""Composite Hilbert space, elementary operators and states.

Tensor ordering is fixed everywhere as ``atom 1 (x) atom 2 (x) ... (x) atom N (x) field``.
Each atom uses the basis ``(|g>, |e>)`` (index 0 is ground), the field uses Fock
levels ``0 .. fock_cutoff - 1``. Frequencies are in units of the coupling ``g``
unless a caller passes something else explicitly.

Operators are plain dense ``numpy`` arrays; states are wrapped in
:class:`QuantumState` so that subsystem dimensions travel with the data.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np

ATOM_DIM = 2

# single-atom matrices in the (|g>, |e>) basis
_S_PLUS = np.array([[0, 0], [1, 0]], dtype=complex)  # |e><g|
_S_MINUS = _S_PLUS.T.copy()  # |g><e|
_SZ = np.diag([-0.5, 0.5]).astype(complex)
# columns are |+> = (|g>+|e>)/sqrt2 and |-> = (|g>-|e>)/sqrt2
PM_BASIS = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_SIGMA_PLUS = PM_BASIS @ np.array([[0, 1], [0, 0]]) @ PM_BASIS.conj().T  # |+><-|
_SIGMA_MINUS = _SIGMA_PLUS.conj().T
_SIGMA_Z = PM_BASIS @ np.diag([0.5, -0.5]) @ PM_BASIS.conj().T

_SINGLE = {
    "S+": _S_PLUS,
    "S-": _S_MINUS,
    "Sz": _SZ,
    "sigma+": _SIGMA_PLUS,
    "sigma-": _SIGMA_MINUS,
    "sigmaz": _SIGMA_Z,
}


@dataclass(frozen=True)
class HilbertSpec:
    """Atoms plus one truncated cavity mode.

    ``delta`` is the atom-cavity detuning and ``omega_rabi`` the classical
    drive strength; the drive is taken resonant with the atoms.
    """

    n_atoms: int
    fock_cutoff: int
    g: float = 1.0
    delta: float = 1.0
    omega_rabi: float = 0.0

    def __post_init__(self):
        if int(self.n_atoms) != self.n_atoms or self.n_atoms < 1:
            raise ValueError(f"n_atoms must be a positive integer, got {self.n_atoms}")
        if int(self.fock_cutoff) != self.fock_cutoff or self.fock_cutoff < 2:
            raise ValueError(f"fock_cutoff must be an integer >= 2, got {self.fock_cutoff}")
        if not self.g > 0:
            raise ValueError(f"g must be positive, got {self.g}")

    @property
    def atom_dim(self) -> int:
        return ATOM_DIM**self.n_atoms

    @property
    def dim(self) -> int:
        return self.atom_dim * self.fock_cutoff

    @property
    def dims(self) -> tuple[int, ...]:
        return (ATOM_DIM,) * self.n_atoms + (self.fock_cutoff,)

    def with_cutoff(self, fock_cutoff: int) -> "HilbertSpec":
        return HilbertSpec(self.n_atoms, fock_cutoff, self.g, self.delta, self.omega_rabi)


@dataclass(frozen=True)
class QuantumState:
    """A ket (``kind='pure'``) or density matrix (``kind='mixed'``).

    ``dims`` lists the subsystem dimensions in tensor order, e.g. ``(2, 2, 12)``
    for two atoms and a field with cutoff 12, ``(12,)`` for a bare field.
    """

    data: np.ndarray
    kind: str
    dims: tuple[int, ...]
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.kind not in ("pure", "mixed"):
            raise ValueError(f"unknown state kind {self.kind!r}")
        d = int(np.prod(self.dims))
        want = (d,) if self.kind == "pure" else (d, d)
        if self.data.shape != want:
            raise ValueError(f"state data shape {self.data.shape} does not match dims {self.dims}")

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    def is_pure(self) -> bool:
        return self.kind == "pure"

    def density(self) -> np.ndarray:
        if self.is_pure:
            return np.outer(self.data, self.data.conj())
        return self.data

    def as_mixed(self) -> "QuantumState":
        return QuantumState(self.density(), "mixed", self.dims, dict(self.info))

    def check(self, atol: float = 1e-10) -> None:
        """Raise ``ValueError`` unless normalisation/positivity hold to ``atol``."""
        if self.is_pure:
            norm = np.linalg.norm(self.data)
            if abs(norm - 1) > atol:
                raise ValueError(f"pure state norm {norm} != 1")
            return
        rho = self.data
        if abs(np.trace(rho) - 1) > atol:
            raise ValueError(f"density matrix trace {np.trace(rho)} != 1")
        if np.max(np.abs(rho - rho.conj().T)) > atol:
            raise ValueError("density matrix is not Hermitian")
        if np.linalg.eigvalsh((rho + rho.conj().T) / 2).min() < -atol:
            raise ValueError("density matrix has a negative eigenvalue")


def _embed(spec: HilbertSpec, site: int, op: np.ndarray) -> np.ndarray:
    factors = [np.eye(d, dtype=complex) for d in spec.dims]
    factors[site] = op
    return reduce(np.kron, factors)


def field_annihilation(cutoff: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, cutoff)), 1).astype(complex)


def annihilation(spec: HilbertSpec) -> np.ndarray:
    """Cavity annihilation operator on the full composite space.

    Built directly in the truncated Fock space, so ``[a, a+] = 1`` only
    below the top level.
    """
    return np.kron(np.eye(spec.atom_dim), field_annihilation(spec.fock_cutoff))


def creation(spec: HilbertSpec) -> np.ndarray:
    return annihilation(spec).conj().T


def number(spec: HilbertSpec) -> np.ndarray:
    return np.kron(np.eye(spec.atom_dim), np.diag(np.arange(spec.fock_cutoff)).astype(complex))


def atomic_operator(spec: HilbertSpec, j: int, which: str) -> np.ndarray:
    """Single-atom operator on atom ``j`` (1-based), identity elsewhere.

    ``which`` is one of ``S+``, ``S-``, ``Sz`` (the |g>/|e> operators) or
    ``sigma+``, ``sigma-``, ``sigmaz`` (the same algebra in the |+>/|-> basis).
    """
    if which not in _SINGLE:
        raise ValueError(f"unknown atomic operator {which!r}; expected one of {sorted(_SINGLE)}")
    if int(j) != j or not 1 <= j <= spec.n_atoms:
        raise IndexError(f"atom index {j} outside 1..{spec.n_atoms}")
    return _embed(spec, j - 1, _SINGLE[which])


def collective(spec: HilbertSpec, which: str) -> np.ndarray:
    return sum(atomic_operator(spec, j, which) for j in range(1, spec.n_atoms + 1))


def collective_sx(spec: HilbertSpec) -> np.ndarray:
    """``S_x = 1/2 sum_j (S+_j + S-_j)`` on the composite space."""
    return 0.5 * (collective(spec, "S+") + collective(spec, "S-"))


def atomic_sx(n_atoms: int) -> np.ndarray:
    """``S_x`` on the atoms alone (no field factor)."""
    return collective_sx(HilbertSpec(n_atoms, 2))[:: 2, :: 2]


# ---------------------------------------------------------------- states

_KETS = {
    "g": np.array([1, 0], dtype=complex),
    "e": np.array([0, 1], dtype=complex),
    "+": PM_BASIS[:, 0],
    "-": PM_BASIS[:, 1],
}


def atomic_ket(labels: str) -> np.ndarray:
    """Product ket from a label string such as ``"gg"`` or ``"+-"``."""
    try:
        return reduce(np.kron, [_KETS[c] for c in labels])
    except KeyError as exc:
        raise ValueError(f"unknown atomic label {exc.args[0]!r}") from None


def atomic_state(labels: str) -> QuantumState:
    return QuantumState(atomic_ket(labels), "pure", (ATOM_DIM,) * len(labels))


def fock_state(cutoff: int, n: int) -> QuantumState:
    if not 0 <= n < cutoff:
        raise ValueError(f"Fock level {n} outside 0..{cutoff - 1}")
    psi = np.zeros(cutoff, dtype=complex)
    psi[n] = 1
    return QuantumState(psi, "pure", (cutoff,))


def thermal_tail_mass(nbar: float, n: int) -> float:
    """Untruncated probability of finding more than ``n`` photons."""
    if nbar == 0:
        return 0.0
    return float((nbar / (1 + nbar)) ** (n + 1))


def thermal_state(spec_or_cutoff: HilbertSpec | int, nbar: float) -> QuantumState:
    """Fock-diagonal thermal field state, renormalised on the truncated space.

    The probability mass lost to truncation (before renormalisation) is kept in
    ``info['truncated_mass']``.
    """
    cutoff = spec_or_cutoff.fock_cutoff if isinstance(spec_or_cutoff, HilbertSpec) else int(spec_or_cutoff)
    if nbar < 0:
        raise ValueError(f"mean photon number must be non-negative, got {nbar}")
    n = np.arange(cutoff)
    if nbar == 0:
        p = (n == 0).astype(float)
    else:
        p = nbar**n / (1 + nbar) ** (n + 1)
    lost = 1.0 - p.sum()
    rho = np.diag(p / p.sum()).astype(complex)
    return QuantumState(rho, "mixed", (cutoff,), {"nbar": nbar, "truncated_mass": float(lost)})


def tensor(*parts):
    """Kronecker product of operators, or of :class:`QuantumState` objects."""
    if not parts:
        raise ValueError("tensor() needs at least one factor")
    if all(isinstance(p, QuantumState) for p in parts):
        dims = sum((p.dims for p in parts), ())
        if all(p.is_pure for p in parts):
            return QuantumState(reduce(np.kron, [p.data for p in parts]), "pure", dims)
        return QuantumState(reduce(np.kron, [p.density() for p in parts]), "mixed", dims)
    if any(isinstance(p, QuantumState) for p in parts):
        raise TypeError("cannot mix states and operators in tensor()")
    return reduce(np.kron, parts)


def partial_trace(state: QuantumState, keep: list[int] | tuple[int, ...]) -> QuantumState:
    """Reduced density matrix on the subsystems listed in ``keep``."""
    dims = state.dims
    n = len(dims)
    keep = sorted(keep)
    if any(not 0 <= k < n for k in keep):
        raise ValueError(f"subsystem indices {keep} out of range for dims {dims}")
    drop = [i for i in range(n) if i not in keep]
    kd = tuple(dims[i] for i in keep)
    dk = int(np.prod(kd)) if kd else 1
    if state.is_pure:
        psi = state.data.reshape(dims).transpose(keep + drop).reshape(dk, -1)
        rho = psi @ psi.conj().T
    else:
        rho = state.data.reshape(dims + dims)
        perm = keep + drop
        rho = rho.transpose(perm + [n + i for i in perm])
        dd = state.dim // dk
        rho = np.einsum("ajbj->ab", rho.reshape(dk, dd, dk, dd))
    return QuantumState(rho, "mixed", kd)


def partial_trace_field(state: QuantumState) -> QuantumState:
    """Trace out the cavity (the last subsystem)."""
    return partial_trace(state, list(range(len(state.dims) - 1)))


def partial_trace_atoms(state: QuantumState) -> QuantumState:
    """Trace out every atom, leaving the cavity."""
    return partial_trace(state, [len(state.dims) - 1])


def top_level_population(state: QuantumState, levels: int = 2) -> float:
    """Population of the highest ``levels`` Fock states (truncation leakage)."""
    rho_f = partial_trace_atoms(state).data
    return float(np.real(np.trace(rho_f[-levels:, -levels:])))
