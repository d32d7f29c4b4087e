import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cavitygate.operators import (
    PM_BASIS,
    HilbertSpec,
    QuantumState,
    annihilation,
    atomic_ket,
    atomic_operator,
    atomic_state,
    collective,
    collective_sx,
    creation,
    field_annihilation,
    fock_state,
    number,
    partial_trace,
    partial_trace_atoms,
    partial_trace_field,
    tensor,
    thermal_state,
    thermal_tail_mass,
    top_level_population,
)


def test_lowest_fock_ladder():
    a = field_annihilation(2)
    assert np.allclose(a @ [0, 1], [1, 0])
    assert np.allclose(a @ [1, 0], [0, 0])


def test_ladder_matrix_element():
    assert field_annihilation(4)[2, 3] == pytest.approx(np.sqrt(3))


def test_number_spectrum_per_atomic_sector():
    spec = HilbertSpec(1, 3)
    vals = np.sort(np.linalg.eigvalsh(number(spec)).round(12))
    assert np.allclose(vals, [0, 0, 1, 1, 2, 2])


def test_creation_is_adjoint():
    spec = HilbertSpec(2, 5)
    assert np.array_equal(creation(spec), annihilation(spec).conj().T)


def test_spec_validation():
    with pytest.raises(ValueError):
        HilbertSpec(0, 4)
    with pytest.raises(ValueError):
        HilbertSpec(1, 1)
    with pytest.raises(ValueError):
        HilbertSpec(1, 4, g=0)


def test_sigma_plus_raises_minus_to_plus():
    spec = HilbertSpec(1, 3)
    psi = tensor(atomic_ket("-"), fock_state(3, 1).data)
    out = atomic_operator(spec, 1, "sigma+") @ psi
    assert np.allclose(out, tensor(atomic_ket("+"), fock_state(3, 1).data))


def test_raising_is_nilpotent():
    spec = HilbertSpec(2, 2)
    sp = atomic_operator(spec, 1, "S+")
    assert np.allclose(sp @ sp, 0)


def test_sigmaz_from_basis_change():
    # |+-> basis: sigma_z = diag(1/2, -1/2) there, rotated back with the Hadamard-like map
    spec = HilbertSpec(1, 2)
    sz_pm = PM_BASIS @ np.diag([0.5, -0.5]) @ PM_BASIS.conj().T
    expected = np.kron(sz_pm, np.eye(2))
    assert np.allclose(atomic_operator(spec, 1, "sigmaz"), expected)
    sp, sm = atomic_operator(spec, 1, "S+"), atomic_operator(spec, 1, "S-")
    assert np.allclose(atomic_operator(spec, 1, "sigmaz"), 0.5 * (sp + sm))


def test_lowering_in_pm_basis():
    spec = HilbertSpec(1, 2)
    sz, sp, sm = (atomic_operator(spec, 1, w) for w in ("sigmaz", "sigma+", "sigma-"))
    assert np.allclose(atomic_operator(spec, 1, "S-"), sz - 0.5 * sp + 0.5 * sm)
    assert np.allclose(atomic_operator(spec, 1, "S+"), sz + 0.5 * sp - 0.5 * sm)


def test_bad_atom_index_and_label():
    spec = HilbertSpec(2, 2)
    with pytest.raises(IndexError):
        atomic_operator(spec, 3, "S+")
    with pytest.raises(IndexError):
        atomic_operator(spec, 0, "S+")
    with pytest.raises(ValueError):
        atomic_operator(spec, 1, "Sy")
    with pytest.raises(ValueError):
        atomic_ket("gx")


@pytest.mark.parametrize("n, expected", [(1, [-0.5, 0.5]), (2, [-1, 0, 0, 1])])
def test_sx_spectrum(n, expected):
    spec = HilbertSpec(n, 2)
    vals = np.linalg.eigvalsh(collective_sx(spec))[::2]
    assert np.allclose(vals, expected)


def test_sx_commutes_with_number():
    spec = HilbertSpec(3, 4)
    sx, n = collective_sx(spec), number(spec)
    assert np.array_equal(sx @ n - n @ sx, np.zeros_like(sx))


@given(st.integers(1, 3))
def test_sx_equals_collective_sigmaz(n):
    spec = HilbertSpec(n, 2)
    assert np.allclose(collective_sx(spec), collective(spec, "sigmaz"), atol=1e-14)


def test_thermal_limits():
    assert np.array_equal(thermal_state(5, 0).data, fock_state(5, 0).density())
    p = np.real(np.diag(thermal_state(200, 1.0).data))
    assert p[0] == pytest.approx(0.5) and p[1] == pytest.approx(0.25)


def test_thermal_tail_reported():
    st20 = thermal_state(20, 2.0)
    # mass above n = 15 of the renormalised distribution
    tail = np.real(np.diag(st20.data))[16:].sum()
    assert tail < 1e-2
    assert st20.info["truncated_mass"] == pytest.approx(thermal_tail_mass(2.0, 19), rel=1e-10)
    assert thermal_tail_mass(2.0, 15) == pytest.approx(sum(2**n / 3 ** (n + 1) for n in range(16, 400)))


@given(st.floats(0, 3), st.integers(2, 30))
def test_thermal_is_valid_state(nbar, cutoff):
    s = thermal_state(cutoff, nbar)
    s.check()
    assert 0 <= s.info["truncated_mass"] < 1


def test_thermal_rejects_negative():
    with pytest.raises(ValueError):
        thermal_state(4, -0.1)


def test_partial_trace_product_state():
    psi = tensor(atomic_state("gg"), fock_state(3, 0))
    assert np.allclose(partial_trace_field(psi).data, atomic_state("gg").density())


def test_partial_trace_entangled_pair_is_maximally_mixed():
    psi = (np.kron(atomic_ket("g"), [1, 0]) + np.kron(atomic_ket("e"), [0, 1])) / np.sqrt(2)
    s = QuantumState(psi.astype(complex), "pure", (2, 2))
    assert np.allclose(partial_trace_field(s).data, np.eye(2) / 2)
    assert np.allclose(partial_trace_atoms(s).data, np.eye(2) / 2)


@given(st.integers(0, 2**31 - 1))
def test_partial_trace_preserves_trace(seed):
    r = np.random.default_rng(seed)
    m = r.normal(size=(12, 12)) + 1j * r.normal(size=(12, 12))
    rho = m @ m.conj().T
    rho /= np.trace(rho)
    s = QuantumState(rho, "mixed", (2, 2, 3))
    assert np.trace(partial_trace_atoms(s).data) == pytest.approx(1)
    assert np.trace(partial_trace(s, [1]).data) == pytest.approx(1)
    # pure and mixed paths agree
    w, v = np.linalg.eigh(rho)
    pure = QuantumState(v[:, -1], "pure", (2, 2, 3))
    assert np.allclose(partial_trace(pure, [0, 2]).data, partial_trace(pure.as_mixed(), [0, 2]).data)


def test_top_level_population():
    s = tensor(atomic_state("g"), fock_state(6, 5))
    assert top_level_population(s) == pytest.approx(1)
    assert top_level_population(tensor(atomic_state("g"), fock_state(6, 3))) == 0


def test_state_validation():
    with pytest.raises(ValueError):
        QuantumState(np.ones(3, complex), "pure", (2,))
    with pytest.raises(ValueError):
        QuantumState(np.ones(2, complex) / 2, "pure", (2,)).check()
    with pytest.raises(TypeError):
        tensor(atomic_state("g"), np.eye(2))


def test_operators_are_not_shared_mutable():
    spec = HilbertSpec(1, 3)
    a1 = annihilation(spec)
    a1[0, 1] = 99
    assert annihilation(spec)[0, 1] == 1
