import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad_vec
from scipy.linalg import expm

from cavitygate.hamiltonian import (
    build_drive_frame,
    build_effective,
    build_effective_lab,
    build_interaction,
    build_residual,
    build_rotated,
    build_windowed,
    constant,
)
from cavitygate.operators import (
    HilbertSpec,
    annihilation,
    atomic_ket,
    collective,
    collective_sx,
    fock_state,
)

SPEC = HilbertSpec(2, 4, 1.0, 1.0, 20.0)


def _comm(x, y):
    return x @ y - y @ x


def test_jaynes_cummings_limit():
    spec = HilbertSpec(1, 4, 1.0, 0.7, 0.0)
    a = annihilation(spec)
    sm = collective(spec, "S-")
    jc = 0.5 * (a.conj().T @ sm + a @ sm.conj().T)
    assert np.allclose(build_interaction(spec)(0.0), jc)


def test_single_matrix_element():
    spec = HilbertSpec(1, 3, 1.0, 0.8, 0.0)
    t = 0.37
    # |e,0> has index 1*3 + 0, |g,1> has index 0*3 + 1
    assert build_interaction(spec)(t)[3, 1] == pytest.approx(0.5 * np.exp(1j * 0.8 * t))


@pytest.mark.parametrize("t", [0.0, 0.3, np.pi])
def test_interaction_hermitian(t):
    H = build_interaction(SPEC)(t / SPEC.delta)
    assert np.allclose(H, H.conj().T)


def test_drive_frame_spectrum_and_identification():
    H0 = build_drive_frame(SPEC)
    vals = np.linalg.eigvalsh(H0)[:: SPEC.fock_cutoff]
    assert np.allclose(vals, [-20, 0, 0, 20])
    assert np.allclose(H0, SPEC.omega_rabi * collective_sx(SPEC))
    U = expm(-1j * H0 * 10.5 * np.pi / SPEC.omega_rabi)
    assert np.max(np.abs(U @ U.conj().T - np.eye(SPEC.dim))) < 1e-12


def test_rotated_frame_at_zero():
    assert np.allclose(build_rotated(SPEC)(0.0), build_interaction(SPEC)(0.0) - build_drive_frame(SPEC))


def test_rotated_frame_without_drive():
    spec = HilbertSpec(2, 4, 1.0, 1.3, 0.0)
    for t in (0.0, 0.4, 2.2):
        assert np.allclose(build_rotated(spec)(t), build_interaction(spec)(t))


@given(st.floats(0, 20))
def test_rotated_frame_matches_conjugation(t):
    H0 = build_drive_frame(SPEC)
    V = expm(1j * H0 * t)
    oracle = V @ (build_interaction(SPEC)(t) - H0) @ V.conj().T
    assert np.max(np.abs(build_rotated(SPEC)(t) - oracle)) < 1e-10


def test_effective_commutes_with_sx():
    sx = collective_sx(SPEC)
    for t in np.linspace(0, 7, 5):
        assert np.max(np.abs(_comm(build_effective(SPEC)(t), sx))) < 1e-13


@given(st.floats(0, 10), st.floats(0, 10))
def test_effective_commutator_is_c_number_times_sx2(t1, t2):
    spec = HilbertSpec(2, 8, 1.0, 1.0, 0.0)
    H = build_effective(spec)
    c = _comm(H(t1), H(t2))
    sx = collective_sx(spec)
    d = spec.delta
    expected = (spec.g**2 / 4) * (np.exp(1j * d * (t1 - t2)) - np.exp(-1j * d * (t1 - t2))) * (sx @ sx)
    # [a, a+] = 1 only below the top Fock level
    keep = np.kron(np.ones(spec.atom_dim, bool), np.arange(spec.fock_cutoff) < spec.fock_cutoff - 1)
    assert np.max(np.abs((c - expected)[np.ix_(keep, keep)])) < 1e-12


@given(st.floats(0, 30))
def test_decomposition_identity(t):
    total = build_effective(SPEC)(t) + build_residual(SPEC)(t)
    assert np.max(np.abs(total - build_rotated(SPEC)(t))) < 1e-12


def test_residual_has_no_sigmaz_part():
    spec = HilbertSpec(1, 3, 1.0, 1.0, 20.0)
    sz = collective(spec, "sigmaz")
    R = build_residual(spec)(0.3)
    # project onto the atomic-diagonal (in the +- basis) sector: 4 Tr_atom(sz R) vs field
    for op in (sz,):
        blocks = (op @ R).reshape(2, 3, 2, 3)
        assert np.allclose(np.einsum("ajak->jk", blocks), 0)
    assert np.allclose(R, build_rotated(spec)(0.3) - build_effective(spec)(0.3))


@pytest.mark.parametrize("omega", [20.0, 50.0])
def test_residual_averages_out(omega):
    spec = HilbertSpec(2, 6, 1.0, 1.0, omega)
    R = build_residual(spec)
    period = 2 * np.pi / omega
    avg, _ = quad_vec(R, 0.0, period, epsabs=1e-12)
    assert np.linalg.norm(avg / period, 2) < 0.1 * spec.g


def test_effective_lab_is_frame_plus_effective():
    spec = SPEC
    t = 1.1
    H0 = build_drive_frame(spec)
    assert np.allclose(build_effective_lab(spec)(t), H0 + collective(spec, "sigmaz") @ (
        0.5 * (np.exp(-1j * t) * annihilation(spec).conj().T + np.exp(1j * t) * annihilation(spec))))


def test_sparse_action_matches_dense():
    r = np.random.default_rng(0)
    y = r.normal(size=(SPEC.dim, 3)) + 1j * r.normal(size=(SPEC.dim, 3))
    for H in (build_interaction(SPEC), build_rotated(SPEC), build_effective(SPEC)):
        for t in (0.0, 0.77, 5.0):
            assert np.allclose(H.apply(t, y), H(t) @ y)


def test_constant_hamiltonian():
    M = np.diag(np.arange(SPEC.dim)).astype(complex)
    H = constant(SPEC, M)
    assert np.array_equal(H(3.0), M)
    assert np.allclose(H.apply(1.0, np.ones(SPEC.dim)), np.arange(SPEC.dim))


def test_windowed_switches_atoms():
    spec = HilbertSpec(2, 3, 1.0, 1.0, 5.0)
    H = build_windowed(spec, [(0.0, 1.0), (0.5, 2.0)])
    assert np.allclose(H(-0.1), 0)
    assert np.allclose(H(0.75), build_interaction(spec)(0.75))
    assert H.breakpoints == (0.0, 0.5, 1.0, 2.0)
    y = np.kron(atomic_ket("gg"), fock_state(3, 0).data)
    assert np.allclose(H.apply(1.5, y), H(1.5) @ y)
    with pytest.raises(ValueError):
        build_windowed(spec, [(0.0, 1.0)])
    with pytest.raises(ValueError):
        build_windowed(spec, [(0.0, 1.0)] * 2, model="bogus")


def test_windowed_effective_matches_lab_form():
    spec = HilbertSpec(2, 3, 1.0, 1.0, 5.0)
    H = build_windowed(spec, [(0.0, 9.0)] * 2, model="effective")
    assert np.allclose(H(0.4), build_effective_lab(spec)(0.4))
