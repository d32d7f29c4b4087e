from math import comb

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cavitygate.analysis import interaction_time_s
from cavitygate.gates import (
    GateParameters,
    custom_parameters,
    dicke_expansion,
    family_omega_t,
    ghz_by_resummation,
    ghz_target,
    ideal_atomic_evolution,
    ideal_phase_gate,
    ideal_phase_gate_computational,
    plan_gate,
    plan_ghz,
    pm_to_computational,
    run_ghz,
    verify_gate,
)
from cavitygate.metrics import TruncationError
from cavitygate.operators import atomic_ket, atomic_sx, fock_state, thermal_state


def test_plan_gate_picks_nearest_admissible_drive():
    p = plan_gate(1.0, 5)
    assert p.k == 5 and p.omega_rabi == pytest.approx(5.25)
    assert p.omega_t == pytest.approx(10.5 * np.pi)
    neighbours = [family_omega_t("gate", k) / np.pi for k in (4, 5, 6)]
    assert neighbours == pytest.approx([8.5, 10.5, 12.5])
    assert plan_gate(1.0, 50).omega_rabi == pytest.approx(50.25)


@given(st.floats(0.1, 100), st.floats(5, 200))
def test_planned_parameters_satisfy_conditions(g, ratio):
    for p in (plan_gate(g, ratio), plan_ghz(2, g, ratio), plan_ghz(3, g, ratio)):
        assert p.lambda_t == pytest.approx(np.pi / 2)
        assert p.delta * p.t == pytest.approx(2 * np.pi)
        p.check()


def test_plan_rejects_weak_drive():
    with pytest.raises(ValueError):
        plan_gate(1.0, 2.0)
    with pytest.raises(ValueError):
        plan_ghz(1, 1.0, 10)


def test_check_rejects_bad_parameters():
    with pytest.raises(ValueError):
        GateParameters(t=2 * np.pi, delta=1.0, omega_rabi=5.0, k=5).check()
    with pytest.raises(ValueError):
        GateParameters(t=np.pi, delta=1.0, omega_rabi=5.25, k=5).check()
    with pytest.raises(ValueError):
        family_omega_t("nope", 1)


def test_physical_interaction_time():
    # g = 2 pi x 50 kHz gives t = 2 pi / g = 2e-5 s
    assert interaction_time_s(50.0) == pytest.approx(2e-5)


def test_ideal_gate_truth_table():
    G = ideal_phase_gate()
    W = pm_to_computational(2)
    assert np.allclose(W[:, 0], atomic_ket("++"))
    assert np.allclose(W[:, 3], atomic_ket("--"))
    assert np.allclose(G @ [1, 0, 0, 0], [-1, 0, 0, 0])
    assert np.allclose(G @ [0, 0, 0, 1], [0, 0, 0, 1])
    assert np.allclose(G @ G, np.eye(4))
    Gc = ideal_phase_gate_computational()
    assert np.allclose(Gc @ Gc.conj().T, np.eye(4))


def test_ideal_evolution_is_gate_up_to_global_phase():
    U = ideal_atomic_evolution(2, plan_gate(1.0, 5))
    W = pm_to_computational(2)
    D = W.conj().T @ U @ W
    phase = D[1, 1]
    assert np.allclose(D / phase, ideal_phase_gate())


@pytest.mark.parametrize("field", [fock_state(12, 3), thermal_state(20, 1.0)])
def test_effective_gate_exact(field):
    rep = verify_gate(plan_gate(1.0, 5), field, "effective")
    assert rep.fidelity >= 1 - 1e-8
    assert rep.phases["++"] == pytest.approx(np.pi, abs=1e-8) or rep.phases["++"] == pytest.approx(-np.pi, abs=1e-8)
    for lbl in ("+-", "-+", "--"):
        assert rep.phases[lbl] == pytest.approx(0, abs=1e-8)


def test_truncation_guard():
    with pytest.raises(TruncationError):
        verify_gate(plan_gate(1.0, 5), thermal_state(6, 2.0), "effective")


def test_unknown_model():
    with pytest.raises(ValueError):
        verify_gate(plan_gate(1.0, 5), fock_state(6, 0), "bogus")


def test_single_atom_dicke():
    dx = dicke_expansion(1)
    assert list(dx.two_m) == [-1, 1]
    assert np.allclose(dx.coefficients, [1 / np.sqrt(2)] * 2)


def test_two_atom_dicke_weights():
    assert np.allclose(dicke_expansion(2).coefficients ** 2, [0.25, 0.5, 0.25])


@given(st.integers(1, 6))
def test_dicke_binomial_and_parity(n):
    dx = dicke_expansion(n)
    assert dx.binomial_residual() < 1e-12
    assert dx.parity_residual() < 1e-12
    expected = [comb(n, (m + n) // 2) / 2**n for m in dx.two_m]
    assert np.allclose(dx.coefficients**2, expected, atol=1e-12)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_dicke_against_product_space(n):
    # brute force: project |g..g> onto the S_x eigenspaces of the full 2^N space
    vals, vecs = np.linalg.eigh(atomic_sx(n).real)
    g_all = atomic_ket("g" * n)
    dx = dicke_expansion(n)
    for two_m, c in zip(dx.two_m, dx.coefficients):
        sel = np.isclose(2 * vals, two_m)
        weight = np.sum(np.abs(vecs[:, sel].T @ g_all) ** 2)
        assert weight == pytest.approx(c**2, abs=1e-12)
    assert np.allclose(dx.product_basis() @ dx.coefficients, g_all)


def test_parity_three_atoms():
    dx = dicke_expansion(3)
    sign = (-1.0) ** ((3 - dx.two_m) // 2)
    assert np.allclose(dx.excited, dx.coefficients * sign, atol=1e-12)


def test_two_atom_ghz_target():
    psi = ghz_target(2).data
    expected = (np.exp(-1j * np.pi / 4) * atomic_ket("gg") - np.exp(1j * np.pi / 4) * atomic_ket("ee")) / np.sqrt(2)
    assert np.allclose(psi, expected)
    for n in range(2, 7):
        assert np.linalg.norm(ghz_target(n).data) == pytest.approx(1)


def test_three_atom_relative_phase():
    # derived from evolving |ggg> at Omega t = 3/2 pi: the |eee> amplitude is -i times the |ggg> one
    psi = ghz_by_resummation(3, plan_ghz(3, 1.0, 0.75))
    ratio = psi.data[-1] / psi.data[0]
    assert ratio == pytest.approx(-1j)
    assert np.allclose(ghz_target(3).data, psi.data)
    printed = ghz_target(3, "printed").data
    assert printed[-1] / printed[0] == pytest.approx(1j)


def test_odd_drive_phase_sets_the_sign():
    # 7.5 pi = 3/2 pi mod 2 pi: same state as the (4n + 3/2) pi family
    psi = ghz_by_resummation(3, custom_parameters(1.0, 7.5 * np.pi))
    assert abs(np.vdot(ghz_target(3).data, psi.data)) ** 2 >= 1 - 1e-12
    rep = run_ghz(3, 3.75, fock_state(8, 0), "effective", params=custom_parameters(1.0, 7.5 * np.pi))
    assert rep.fidelity >= 1 - 1e-8
    # pi/2 mod 2 pi flips the relative sign, giving the printed odd-N expression
    for omega_t in (0.5 * np.pi, 2.5 * np.pi, 8.5 * np.pi):
        psi = ghz_by_resummation(3, custom_parameters(1.0, omega_t))
        assert abs(np.vdot(ghz_target(3, "printed").data, psi.data)) ** 2 == pytest.approx(1, abs=1e-12)
        assert abs(np.vdot(ghz_target(3).data, psi.data)) ** 2 == pytest.approx(0, abs=1e-12)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_effective_ghz_any_fock_state(n):
    rep = run_ghz(n, 10, fock_state(12, 2), "effective")
    assert rep.fidelity >= 1 - 1e-8
    assert ghz_by_resummation(n, plan_ghz(n, 1.0, 10)).data == pytest.approx(ghz_target(n).data, abs=1e-12)


def test_printed_odd_form_is_not_produced():
    rep = run_ghz(3, 10, fock_state(8, 0), "effective")
    assert rep.per_input["printed_form"] < 1e-8
