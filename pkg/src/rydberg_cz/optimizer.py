"""Box-constrained finite-difference gradient descent on the gate infidelity."""

from __future__ import annotations

import dataclasses
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .analysis import fidelity
from .core import PARAMETER_NAMES, InvalidParameterError, PulseParams, Shape, SystemConfig, initial_state, target_state
from .propagator import PropagationPlan, propagate

DEFAULT_H_REL = 1e-4
ARMIJO = 1e-4
SHRINK = 0.5
STALL_WINDOW = 50
STALL_RTOL = 1e-10
MAX_HALVINGS = 60


@dataclass(frozen=True)
class ParameterBounds:
    """Per-parameter ``(min, max)`` limits in 2π·MHz.

    Parameters missing from ``limits`` are unbounded. ``tau`` bounds the
    flat-top rise time and is checked, not optimised.
    """

    limits: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    tau: tuple[float, float] | None = None

    def __post_init__(self):
        clean = {}
        for name, (lo, hi) in dict(self.limits).items():
            if name not in PARAMETER_NAMES:
                raise InvalidParameterError(f"unknown bounded parameter {name!r}")
            lo, hi = float(lo), float(hi)
            if not lo < hi:
                raise InvalidParameterError(f"bound on {name} needs min < max, got ({lo}, {hi})")
            clean[name] = (lo, hi)
        object.__setattr__(self, "limits", clean)
        if self.tau is not None:
            lo, hi = map(float, self.tau)
            if not 0 < lo < hi:
                raise InvalidParameterError(f"tau bound needs 0 < min < max, got ({lo}, {hi})")
            object.__setattr__(self, "tau", (lo, hi))

    @classmethod
    def unbounded(cls) -> "ParameterBounds":
        return cls()

    @classmethod
    def experimental(cls) -> "ParameterBounds":
        """Hardware limits of the two-photon setup.

        Red Rabi frequency up to 400, blue up to 30, single-photon detuning
        below 500 and a 200-400 ns flat-top rise time. The lower limits and
        the ±50 window on δ only keep the search physical.
        """
        return cls(
            {
                "omega0": (1.0, 400.0),
                "omegaB": (1.0, 30.0),
                "delta_big": (50.0, 500.0),
                "delta_small": (-50.0, 50.0),
            },
            tau=(0.2, 0.4),
        )

    def lower(self, names: Sequence[str]) -> np.ndarray:
        return np.array([self.limits.get(n, (-math.inf, math.inf))[0] for n in names])

    def upper(self, names: Sequence[str]) -> np.ndarray:
        return np.array([self.limits.get(n, (-math.inf, math.inf))[1] for n in names])

    def clip(self, x, names: Sequence[str]) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lower(names), self.upper(names))

    def check(self, params: PulseParams) -> None:
        """Raise :class:`InvalidParameterError` naming the first violated bound."""
        for name, (lo, hi) in self.limits.items():
            value = getattr(params, name)
            if not lo <= value <= hi:
                raise InvalidParameterError(f"{name}={value} violates its bound [{lo}, {hi}]")
        if self.tau is not None and params.shape is Shape.FLATTOP:
            lo, hi = self.tau
            if not lo <= params.tau <= hi:
                raise InvalidParameterError(f"tau={params.tau} violates its bound [{lo}, {hi}]")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    params: tuple[float, ...]
    infidelity: float
    gradient_norm: float
    step: float


@dataclass(frozen=True)
class OptimizationTrace:
    """Accepted iterates of one descent run.

    ``status`` is ``"gradient"`` (projected gradient below tolerance) or
    ``"stalled"`` (no relative progress over the stall window) for a
    converged run, ``"budget"`` when the iteration budget ran out and
    ``"line-search"`` when no decreasing step could be found.
    """

    names: tuple[str, ...]
    iterations: tuple[IterationRecord, ...]
    final_params: PulseParams
    final_infidelity: float
    status: str
    evaluations: int = 0

    @property
    def converged(self) -> bool:
        return self.status in ("gradient", "stalled")

    @property
    def infidelities(self) -> np.ndarray:
        return np.array([r.infidelity for r in self.iterations])

    def to_jsonl(self) -> str:
        lines = [
            json.dumps(
                {"iteration": r.iteration, "params": dict(zip(self.names, r.params)), "infidelity": r.infidelity},
                sort_keys=True,
            )
            for r in self.iterations
        ]
        return "\n".join(lines) + "\n"

    @staticmethod
    def records_from_jsonl(text: str) -> list[dict]:
        return [json.loads(line) for line in text.splitlines() if line.strip()]


def objective(params: PulseParams, config: SystemConfig, plan: PropagationPlan) -> float:
    """Infidelity 1 - F of the gate started from the equal superposition."""
    plan = dataclasses.replace(plan, t_start=params.t_start, t_end=params.t_end, record_stride=10**9)
    final = propagate(initial_state(plan.model), params, config, plan).final_state
    return 1.0 - fidelity(final, target_state(plan.model))


def finite_difference(
    f: Callable[[np.ndarray], float],
    x,
    h_rel: float = DEFAULT_H_REL,
    lower=None,
    upper=None,
    fx: float | None = None,
    workers: int = 1,
) -> np.ndarray:
    """Finite-difference gradient of ``f`` at ``x``.

    Central differences with step ``h_rel * max(|x_j|, 1)``. A component
    whose central stencil would cross a bound uses a one-sided difference
    pointing into the box.
    """
    if not h_rel > 0:
        raise ValueError("h_rel must be positive")
    x = np.asarray(x, dtype=float)
    n = x.size
    lower = np.full(n, -math.inf) if lower is None else np.asarray(lower, dtype=float)
    upper = np.full(n, math.inf) if upper is None else np.asarray(upper, dtype=float)
    steps = h_rel * np.maximum(np.abs(x), 1.0)

    points, plan = [], []
    for j in range(n):
        e = np.zeros(n)
        e[j] = steps[j]
        if x[j] + steps[j] > upper[j]:
            plan.append((j, "back"))
            points.append(x - e)
        elif x[j] - steps[j] < lower[j]:
            plan.append((j, "forward"))
            points.append(x + e)
        else:
            plan.append((j, "central"))
            points.extend([x + e, x - e])
    needs_fx = any(kind != "central" for _, kind in plan)
    if needs_fx and fx is None:
        fx = f(x)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            values = list(pool.map(f, points))
    else:
        values = [f(p) for p in points]

    grad = np.empty(n)
    k = 0
    for j, kind in plan:
        if kind == "central":
            grad[j] = (values[k] - values[k + 1]) / (2 * steps[j])
            k += 2
        elif kind == "forward":
            grad[j] = (values[k] - fx) / steps[j]
            k += 1
        else:
            grad[j] = (fx - values[k]) / steps[j]
            k += 1
    return grad


def finite_diff_gradient(
    params: PulseParams,
    config: SystemConfig,
    plan: PropagationPlan,
    h_rel: float = DEFAULT_H_REL,
    names: Sequence[str] = PARAMETER_NAMES,
    bounds: ParameterBounds | None = None,
    objective_fn: Callable[[PulseParams], float] | None = None,
) -> np.ndarray:
    """Gradient of the infidelity with respect to the parameters ``names``."""
    names = tuple(names)
    bounds = bounds or ParameterBounds.unbounded()
    fn = objective_fn or (lambda p: objective(p, config, plan))
    return finite_difference(
        lambda v: fn(params.with_vector(v, names)),
        params.vector(names),
        h_rel,
        bounds.lower(names),
        bounds.upper(names),
    )


def optimize(
    initial: PulseParams,
    bounds: ParameterBounds,
    config: SystemConfig,
    plan: PropagationPlan,
    budget: int = 200,
    names: Sequence[str] = PARAMETER_NAMES,
    objective_fn: Callable[[PulseParams], float] | None = None,
    h_rel: float = DEFAULT_H_REL,
    gtol: float = 1e-6,
    initial_step: float = 1.0,
    workers: int = 1,
    callback: Callable[[IterationRecord], None] | None = None,
) -> OptimizationTrace:
    """Projected gradient descent with a backtracking line search.

    Each iteration doubles the previous accepted step and halves it until
    the Armijo condition ``f(x_new) <= f(x) - c * g·(x - x_new)`` holds, so
    accepted iterates never increase the objective. Iterates are projected
    onto the box after every trial step.

    Parameters
    ----------
    names
        Parameters to vary; the rest stay at their value in ``initial``.
    objective_fn
        Replaces the physics objective, mainly for tests.
    """
    names = tuple(names)
    bounds.check(initial)
    lo, hi = bounds.lower(names), bounds.upper(names)
    evaluations = 0

    def f(v):
        nonlocal evaluations
        evaluations += 1
        p = initial.with_vector(v, names)
        return objective_fn(p) if objective_fn else objective(p, config, plan)

    x = initial.vector(names)
    fx = f(x)
    step = float(initial_step)
    records: list[IterationRecord] = []
    status = "budget"

    for it in range(budget + 1):
        g = finite_difference(f, x, h_rel, lo, hi, fx, workers)
        pg = x - np.clip(x - g, lo, hi)
        gnorm = float(np.linalg.norm(pg))
        rec = IterationRecord(it, tuple(float(v) for v in x), float(fx), gnorm, step)
        records.append(rec)
        if callback:
            callback(rec)
        if gnorm < gtol:
            status = "gradient"
            break
        if it >= STALL_WINDOW:
            old = records[it - STALL_WINDOW].infidelity
            if old - fx <= STALL_RTOL * abs(old):
                status = "stalled"
                break
        if it == budget:
            break

        step *= 2.0
        for _ in range(MAX_HALVINGS):
            x_new = np.clip(x - step * g, lo, hi)
            f_new = f(x_new)
            if f_new <= fx - ARMIJO * float(g @ (x - x_new)) and f_new <= fx:
                break
            step *= SHRINK
        else:
            status = "line-search"
            break
        x, fx = x_new, f_new

    return OptimizationTrace(
        names=names,
        iterations=tuple(records),
        final_params=initial.with_vector(x, names),
        final_infidelity=float(fx),
        status=status,
        evaluations=evaluations,
    )
