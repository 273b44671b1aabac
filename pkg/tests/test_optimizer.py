from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rydberg_cz.core import (
    TABLE1_INITIAL,
    TABLE1_SYSTEM,
    TABLE2_INITIAL,
    TABLE2_OPTIMISED,
    TABLE2_SYSTEM,
    InvalidParameterError,
    Model,
)
from rydberg_cz.optimizer import (
    OptimizationTrace,
    ParameterBounds,
    finite_diff_gradient,
    finite_difference,
    objective,
    optimize,
)
from rydberg_cz.propagator import PropagationPlan

NAMES = ("omega0", "omegaB", "delta_big")
PLAN = PropagationPlan.for_gate(TABLE1_INITIAL, Model.EFFECTIVE, 1e-4)


def smooth(x):
    return float(np.sum(np.exp(0.3 * x)) + np.sin(x[0]) * x[1] ** 2)


def smooth_grad(x):
    g = 0.3 * np.exp(0.3 * x)
    g[0] += np.cos(x[0]) * x[1] ** 2
    g[1] += 2 * np.sin(x[0]) * x[1]
    return g


def test_objective_examples():
    assert objective(TABLE1_INITIAL, TABLE1_SYSTEM, PLAN) == pytest.approx(0.11, abs=0.03)
    plan2 = PropagationPlan.for_gate(TABLE2_INITIAL, Model.EFFECTIVE, 5e-4)
    assert 0 < objective(TABLE2_INITIAL, TABLE2_SYSTEM, plan2) < 1


@given(
    a=st.lists(st.floats(0.1, 5), min_size=3, max_size=3),
    c=st.lists(st.floats(-3, 3), min_size=3, max_size=3),
    x=st.lists(st.floats(-10, 10), min_size=3, max_size=3),
)
def test_quadratic_gradient(a, c, x):
    a, c, x = map(np.array, (a, c, x))
    g = finite_difference(lambda v: float(np.sum(a * (v - c) ** 2)), x)
    np.testing.assert_allclose(g, 2 * a * (x - c), rtol=1e-6, atol=1e-6)


def test_gradient_second_order():
    x = np.array([0.7, 1.3, -0.4])
    errs = [np.linalg.norm(finite_difference(smooth, x, h) - smooth_grad(x)) for h in (1e-2, 5e-3)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_symmetric_component_vanishes():
    g = finite_difference(lambda v: float(v[0] ** 2 + v[1] ** 3), np.array([0.0, 1.0]))
    assert abs(g[0]) < 1e-15


def test_one_sided_at_bounds():
    f = lambda v: float(v[0] ** 2)  # noqa: E731
    seen = []

    def spy(v):
        seen.append(float(v[0]))
        return f(v)

    g = finite_difference(spy, np.array([1.0]), 1e-3, lower=np.array([0.0]), upper=np.array([1.0]))
    assert max(seen) <= 1.0
    assert g[0] == pytest.approx(2.0, abs=2e-3)


def test_physics_gradient_symmetry_and_shape():
    g = finite_diff_gradient(TABLE1_INITIAL, TABLE1_SYSTEM, PLAN, names=NAMES, objective_fn=lambda p: (p.omega0 - 300) ** 2 + p.omegaB)
    np.testing.assert_allclose(g, [0.0, 1.0, 0.0], atol=1e-8)


def test_convex_synthetic_converges():
    target = np.array([310.0, 290.0, 980.0])
    scale = np.array([1.0, 2.0, 0.5])
    fn = lambda p: float(np.sum(scale * (p.vector(NAMES) - target) ** 2))  # noqa: E731
    trace = optimize(TABLE1_INITIAL, ParameterBounds.unbounded(), TABLE1_SYSTEM, PLAN, 500, NAMES, fn, gtol=1e-8, initial_step=0.1)
    assert trace.converged and trace.status == "gradient"
    assert trace.iterations[-1].gradient_norm < 1e-8
    np.testing.assert_allclose(trace.final_params.vector(NAMES), target, atol=1e-6)
    assert np.all(np.diff(trace.infidelities) <= 0)


def test_zero_objective_no_movement():
    trace = optimize(TABLE1_INITIAL, ParameterBounds.unbounded(), TABLE1_SYSTEM, PLAN, 50, NAMES, lambda p: 0.0)
    assert len(trace.iterations) == 1 and trace.final_params == TABLE1_INITIAL


def test_bounds_respected_and_monotone():
    fn = lambda p: float((p.omega0 - 500) ** 2 + (p.omegaB - 0) ** 2)  # noqa: E731
    bounds = ParameterBounds({"omega0": (1, 400), "omegaB": (1, 30)})
    start = TABLE2_INITIAL
    trace = optimize(start, bounds, TABLE2_SYSTEM, PLAN, 200, ("omega0", "omegaB"), fn, initial_step=0.1)
    for rec in trace.iterations:
        assert 1 <= rec.params[0] <= 400 and 1 <= rec.params[1] <= 30
    assert np.all(np.diff(trace.infidelities) <= 0)
    assert trace.final_params.omega0 == 400 and trace.final_params.omegaB == 1
    assert trace.converged


def test_budget_reports_non_convergence():
    fn = lambda p: float((p.omega0 - 350) ** 2)  # noqa: E731
    trace = optimize(TABLE1_INITIAL, ParameterBounds.unbounded(), TABLE1_SYSTEM, PLAN, 2, ("omega0",), fn, initial_step=1e-6)
    assert trace.status == "budget" and not trace.converged
    assert len(trace.iterations) == 3


def test_physics_descent_is_monotone_and_deterministic():
    kwargs = dict(budget=3, names=NAMES)
    a = optimize(TABLE1_INITIAL, ParameterBounds.unbounded(), TABLE1_SYSTEM, PLAN, **kwargs)
    b = optimize(TABLE1_INITIAL, ParameterBounds.unbounded(), TABLE1_SYSTEM, PLAN, **kwargs)
    assert a.iterations == b.iterations
    assert np.all(np.diff(a.infidelities) <= 0)
    assert a.final_infidelity < a.iterations[0].infidelity


def test_initial_outside_bounds_rejected():
    with pytest.raises(InvalidParameterError, match="omega0"):
        optimize(TABLE1_INITIAL.replace(omega0=450.0), ParameterBounds.experimental(), TABLE1_SYSTEM, PLAN, 1)


def test_experimental_bounds_admit_reference_point():
    ParameterBounds.experimental().check(TABLE2_OPTIMISED)
    with pytest.raises(InvalidParameterError, match="tau"):
        ParameterBounds.experimental().check(TABLE2_OPTIMISED.replace(tau=0.5))


def test_bounds_invariant():
    with pytest.raises(InvalidParameterError):
        ParameterBounds({"omega0": (5, 5)})
    with pytest.raises(InvalidParameterError):
        ParameterBounds({"bogus": (0, 1)})


@given(x=st.lists(st.floats(-1e4, 1e4), min_size=4, max_size=4))
def test_clip_feasible(x):
    b = ParameterBounds.experimental()
    names = ("omega0", "omegaB", "delta_big", "delta_small")
    c = b.clip(x, names)
    assert np.all(c >= b.lower(names)) and np.all(c <= b.upper(names))


def test_jsonl_round_trip():
    fn = lambda p: float((p.omega0 - 301) ** 2)  # noqa: E731
    trace = optimize(TABLE1_INITIAL, ParameterBounds.unbounded(), TABLE1_SYSTEM, PLAN, 3, ("omega0",), fn, initial_step=0.1)
    records = OptimizationTrace.records_from_jsonl(trace.to_jsonl())
    assert [r["iteration"] for r in records] == list(range(len(trace.iterations)))
    assert records[-1]["params"]["omega0"] == trace.iterations[-1].params[0]
    assert math.isclose(records[0]["infidelity"], 1.0)
