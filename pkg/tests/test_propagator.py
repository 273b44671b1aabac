from __future__ import annotations

import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st

from rydberg_cz.core import (
    ANGULAR,
    TABLE1_OPTIMISED,
    TABLE1_SYSTEM,
    TABLE2_REPRODUCED,
    TABLE2_SYSTEM,
    InvalidParameterError,
    Model,
    QuantumState,
    SystemConfig,
    initial_state,
)
from rydberg_cz.hamiltonian import HamiltonianSnapshot, effective_rabi
from rydberg_cz.propagator import (
    NormGrowthError,
    PropagationPlan,
    StepSizeError,
    exponential,
    propagate,
    propagate_rk,
    step_eigen,
    step_operators,
)
from rydberg_cz.scenarios import rabi_drive


def test_plan_grid():
    plan = PropagationPlan(1e-4, -0.25, 0.25, Model.EFFECTIVE, record_stride=7)
    assert plan.n_steps == 5000
    assert plan.step == pytest.approx(1e-4)
    idx = plan.record_indices()
    assert idx[0] == 0 and idx[-1] == 5000
    padded = PropagationPlan(0.3, 0.0, 1.0)
    assert padded.n_steps == 4 and padded.step == pytest.approx(0.25)
    with pytest.raises(InvalidParameterError):
        PropagationPlan(0.0, 0.0, 1.0)


def test_resolution_reports_cycles_per_step():
    plan = PropagationPlan.for_gate(TABLE1_OPTIMISED, Model.EFFECTIVE, 1e-4)
    assert plan.resolution(TABLE1_OPTIMISED) == pytest.approx(1e-4 * 974.78)


def test_zero_hamiltonian_is_identity():
    psi = initial_state(Model.EFFECTIVE)
    out = step_eigen(psi, HamiltonianSnapshot(np.zeros((9, 9)), Model.EFFECTIVE), 0.1)
    np.testing.assert_array_equal(out.amplitudes, psi.amplitudes)


def test_dimension_mismatch():
    with pytest.raises(InvalidParameterError):
        step_eigen(initial_state(Model.FULL), HamiltonianSnapshot(np.zeros((9, 9)), Model.EFFECTIVE), 0.1)


def _random_h(rng, d, loss):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    h = (a + a.conj().T) * 10
    if loss:
        h -= 1j * np.diag(rng.uniform(0, 3, d))
    return h


@pytest.mark.parametrize("loss", [False, True])
def test_exponential_matches_expm(loss):
    rng = np.random.default_rng(1)
    for _ in range(20):
        h = _random_h(rng, 9, loss)
        op, _ = exponential(h, 0.003)
        ref = scipy.linalg.expm(-1j * ANGULAR * 0.003 * h)
        assert np.linalg.norm(op - ref) <= 1e-10 * np.linalg.norm(ref)


def test_defective_matrix_falls_back():
    h = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
    ops, bad = step_operators(h[None], 0.1)
    assert bad[0]
    np.testing.assert_allclose(ops[0], scipy.linalg.expm(-1j * ANGULAR * 0.1 * h), atol=1e-14)


@given(seed=st.integers(0, 2**32 - 1))
def test_hermitian_step_preserves_norm(seed):
    rng = np.random.default_rng(seed)
    h = _random_h(rng, 16, False)
    psi = rng.normal(size=16) + 1j * rng.normal(size=16)
    psi /= np.linalg.norm(psi)
    out = step_eigen(QuantumState(psi, Model.FULL), HamiltonianSnapshot(h, Model.FULL), 0.01)
    assert out.norm() == pytest.approx(1.0, abs=1e-12)


def test_single_level_decay():
    # |rr⟩ of the effective model with nothing driving it: H = diag(..., U + 2δ' - 2iγ).
    h = np.zeros((9, 9), complex)
    h[-1, -1] = -1j * 0.7
    psi = QuantumState(np.eye(9)[-1], Model.EFFECTIVE)
    out = step_eigen(psi, HamiltonianSnapshot(h, Model.EFFECTIVE), 0.05)
    assert out.population("rr") == pytest.approx(math.exp(-2 * ANGULAR * 0.7 * 0.05), rel=1e-12)


@pytest.mark.parametrize("model", list(Model))
def test_unitary_gate_keeps_norm(model):
    plan = PropagationPlan.for_gate(TABLE1_OPTIMISED, model, 1e-4)
    traj = propagate(initial_state(model), TABLE1_OPTIMISED, TABLE1_SYSTEM, plan)
    assert abs(traj.final_state.norm() - 1.0) < 1e-9
    assert np.abs(traj.norms - 1).max() < 1e-9
    assert traj.fallback_steps == ()


def test_norm_monotone_under_loss():
    plan = PropagationPlan.for_gate(TABLE2_REPRODUCED, Model.FULL, 5e-4)
    traj = propagate(initial_state(Model.FULL), TABLE2_REPRODUCED, TABLE2_SYSTEM, plan)
    assert np.all(np.diff(traj.norms) <= 1e-9)
    assert traj.final_state.norm() < 1.0


def test_norm_growth_detected():
    bad = TABLE2_SYSTEM.replace(gamma_r=0.0)
    object.__setattr__(bad, "gamma_r", -1.0)  # bypass validation to emulate a sign error
    plan = PropagationPlan.for_gate(TABLE2_REPRODUCED, Model.EFFECTIVE, 5e-4)
    with pytest.raises(NormGrowthError):
        propagate(initial_state(Model.EFFECTIVE), TABLE2_REPRODUCED, bad, plan)


def test_initial_state_checks():
    plan = PropagationPlan.for_gate(TABLE1_OPTIMISED, Model.EFFECTIVE, 1e-3)
    with pytest.raises(InvalidParameterError):
        propagate(initial_state(Model.FULL), TABLE1_OPTIMISED, TABLE1_SYSTEM, plan)
    with pytest.raises(InvalidParameterError):
        propagate(QuantumState(2 * initial_state(Model.EFFECTIVE).amplitudes, Model.EFFECTIVE), TABLE1_OPTIMISED, TABLE1_SYSTEM, plan)


def _rabi_case(dt, lossless=True):
    drive = rabi_drive(TABLE2_REPRODUCED, 2.0)
    cfg = TABLE2_SYSTEM.replace(gamma_r=0.0) if lossless else TABLE2_SYSTEM
    plan = PropagationPlan(dt, -1.0, 1.0, Model.EFFECTIVE)
    psi = QuantumState.from_labels({"ge": 1.0}, Model.EFFECTIVE)
    omega = effective_rabi(drive, 0.0)
    return drive, cfg, plan, psi, omega


def test_two_level_rabi_oracle_eigen():
    drive, cfg, plan, psi, omega = _rabi_case(1e-3)
    traj = propagate(psi, drive, cfg, plan)
    t = traj.times - traj.times[0]
    exact = np.sin(ANGULAR * omega * t / 2) ** 2
    assert np.abs(traj.population("re") - exact).max() < 1e-8


def test_two_level_rabi_oracle_rk4():
    drive, cfg, plan, psi, omega = _rabi_case(1e-3)
    traj = propagate_rk(psi, drive, cfg, plan)
    t = traj.times - traj.times[0]
    exact = np.sin(ANGULAR * omega * t / 2) ** 2
    assert np.abs(traj.population("re") - exact).max() < 1e-8
    assert np.abs(traj.norms - 1).max() < 1e-8


def test_eigen_agrees_with_rk4_table1():
    p, cfg = TABLE1_OPTIMISED, TABLE1_SYSTEM
    psi0 = initial_state(Model.EFFECTIVE)
    eig = propagate(psi0, p, cfg, PropagationPlan.for_gate(p, Model.EFFECTIVE, 2.5e-5, 10**9)).final_state
    rk = propagate_rk(psi0, p, cfg, PropagationPlan.for_gate(p, Model.EFFECTIVE, 2.5e-6, 10**9)).final_state
    assert np.linalg.norm(eig.amplitudes - rk.amplitudes) < 1e-6
    assert abs(rk.norm() - 1) < 1e-8


def test_eigen_second_order():
    p, cfg = TABLE1_OPTIMISED, TABLE1_SYSTEM
    psi0 = initial_state(Model.EFFECTIVE)
    finals = [
        propagate(psi0, p, cfg, PropagationPlan.for_gate(p, Model.EFFECTIVE, dt, 10**9)).final_state.amplitudes
        for dt in (4e-4, 2e-4, 1e-4)
    ]
    ratio = np.linalg.norm(finals[0] - finals[1]) / np.linalg.norm(finals[1] - finals[2])
    assert math.log2(ratio) >= 1.9


def test_rk4_fourth_order():
    # Smooth Gaussian envelope; the flat-top shoulder is only C¹ and spoils the asymptotics.
    p, cfg = TABLE1_OPTIMISED, SystemConfig(separation=3.0)
    finals = [
        propagate_rk(initial_state(Model.EFFECTIVE), p, cfg, PropagationPlan.for_gate(p, Model.EFFECTIVE, dt, 10**9)).final_state.amplitudes
        for dt in (4e-4, 2e-4, 1e-4)
    ]
    ratio = np.linalg.norm(finals[0] - finals[1]) / np.linalg.norm(finals[1] - finals[2])
    assert math.log2(ratio) >= 3.8


def test_rk4_unstable_step_detected():
    plan = PropagationPlan.for_gate(TABLE1_OPTIMISED, Model.EFFECTIVE, 1e-4)
    with pytest.raises(StepSizeError):
        propagate_rk(initial_state(Model.EFFECTIVE), TABLE1_OPTIMISED, TABLE1_SYSTEM, plan)


def test_psi_minus_is_dark():
    p = TABLE2_REPRODUCED
    cfg = TABLE2_SYSTEM.replace(gamma_r=0.0)
    plan = PropagationPlan.for_gate(p, Model.EFFECTIVE, 5e-4)
    psi = QuantumState.from_labels({"gr": 1 / math.sqrt(2), "rg": -1 / math.sqrt(2)}, Model.EFFECTIVE)
    traj = propagate(psi, p, cfg, plan)
    leakage = np.abs(np.diff(traj.psi_minus))
    assert leakage.max() < 1e-10
    assert traj.psi_plus.max() < 1e-20


def test_psi_minus_decays_only_by_loss():
    p = TABLE2_REPRODUCED
    plan = PropagationPlan.for_gate(p, Model.EFFECTIVE, 5e-4)
    psi = QuantumState.from_labels({"gr": 1 / math.sqrt(2), "rg": -1 / math.sqrt(2)}, Model.EFFECTIVE)
    traj = propagate(psi, p, TABLE2_SYSTEM, plan)
    t = traj.times - traj.times[0]
    np.testing.assert_allclose(traj.psi_minus, np.exp(-2 * ANGULAR * TABLE2_SYSTEM.gamma_r * t), rtol=1e-9)


def test_full_and_effective_agree_table1():
    p, cfg = TABLE1_OPTIMISED, TABLE1_SYSTEM
    trajs = {
        m: propagate(initial_state(m), p, cfg, PropagationPlan.for_gate(p, m, 1e-4, record_stride=50)) for m in Model
    }
    for label in ("gg", "ge", "eg", "ee", "psi+"):
        diff = np.abs(trajs[Model.FULL].population(label) - trajs[Model.EFFECTIVE].population(label))
        assert diff.max() < 0.02, label


def test_static_phases_are_a_gauge():
    p = TABLE1_OPTIMISED
    plan = PropagationPlan.for_gate(p, Model.EFFECTIVE, 1e-4, 10**9)
    psi0 = initial_state(Model.EFFECTIVE)
    a = propagate(psi0, p, TABLE1_SYSTEM, plan).final_state
    b = propagate(psi0, p, TABLE1_SYSTEM.replace(theta1=0.8, theta2=2.9), plan).final_state
    for label in ("gg", "ge", "eg", "ee"):
        assert b[label] == pytest.approx(a[label], abs=1e-12)
