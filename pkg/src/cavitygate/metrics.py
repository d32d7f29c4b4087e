"""Fidelity metrics and the report record shared by every scenario."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .operators import QuantumState


class TruncationError(RuntimeError):
    """Population reached the top Fock levels; the cutoff is too small."""


@dataclass
class FidelityReport:
    label: str
    fidelity: float
    per_input: dict[str, float] = field(default_factory=dict)
    delta_f: dict[str, float] = field(default_factory=dict)
    truncation_leakage: float = 0.0
    parameters: dict = field(default_factory=dict)
    # relative phases (radians), gate runs only
    phases: dict[str, float] = field(default_factory=dict)

    def check(self) -> None:
        values = [self.fidelity, *self.per_input.values()]
        for v in values:
            if not math.isnan(v) and not -1e-9 <= v <= 1 + 1e-9:
                raise ValueError(f"fidelity {v} outside [0, 1]")
        if self.truncation_leakage < 0:
            raise ValueError("negative truncation leakage")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "FidelityReport":
        return cls(**d)


def state_fidelity(a: QuantumState, b: QuantumState) -> float:
    """``|<a|b>|^2`` for two kets, ``<a|rho|a>`` when one side is mixed."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if a.is_pure and b.is_pure:
        return float(abs(np.vdot(a.data, b.data)) ** 2)
    if not a.is_pure and not b.is_pure:
        raise ValueError("fidelity between two mixed states is not supported")
    ket, rho = (a, b) if a.is_pure else (b, a)
    return float(np.real(np.vdot(ket.data, rho.data @ ket.data)))
