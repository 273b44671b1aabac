"""Monte-Carlo study of per-atom motional laser phases.

Each atom moving through the standing phase pattern of the excitation
lasers picks up a phase ϑ_j in [0, π]. A static phase would be a pure change
of basis and leave the gate untouched, so the phase is modelled as growing
linearly over the gate, from 0 at the start to ϑ_j at the end (see
``SystemConfig.phase_drift``).

Because a drifting phase is a rotating diagonal frame applied to the
zero-phase Hamiltonian, every sample can reuse the zero-phase step
propagators: in the co-moving frame the step is ``χ ← U0_k · (w ⊙ χ)``
with a constant diagonal ``w`` per sample. The batch below is exact, not an
approximation, and matches :func:`rydberg_cz.propagator.propagate` run
sample by sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri
from scipy.stats import linregress

from .core import InvalidParameterError, PulseParams, SystemConfig, initial_state, target_state
from .hamiltonian import hamiltonian_series, phase_frame
from .propagator import PropagationPlan, step_operators

#: Temperature at which the motional phases are fully randomised (µK).
REFERENCE_TEMPERATURE = 75.0
BATCH = 2048


class DegenerateFitError(ValueError):
    """All sweep temperatures coincide, so no line can be fitted."""


@dataclass(frozen=True)
class MotionalSample:
    theta1: float
    theta2: float
    fidelity: float


@dataclass(frozen=True)
class TemperatureSweepResult:
    temperatures: tuple[float, ...]
    mean_fidelities: tuple[float, ...]
    stderrs: tuple[float, ...]
    sample_counts: tuple[int, ...]
    fit_slope: float
    fit_intercept: float
    rng_seed: int


def phase_scale(temperature: float) -> float:
    """Width σ of the motional-phase distribution, π·√(Θ/75 µK)."""
    if temperature < 0:
        raise InvalidParameterError(f"temperature must be non-negative, got {temperature}")
    return math.pi * math.sqrt(temperature / REFERENCE_TEMPERATURE)


def truncated_half_normal(u, sigma: float) -> np.ndarray:
    """Map uniforms ``u`` in [0, 1) to |ζ|, ζ ~ N(0, σ²), conditioned on |ζ| ≤ π."""
    u = np.asarray(u, dtype=float)
    if sigma == 0:
        return np.zeros_like(u)
    mass = 2.0 * ndtr(math.pi / sigma) - 1.0
    return np.minimum(sigma * ndtri(0.5 * (1.0 + u * mass)), math.pi)


def sample_uniforms(seed: int, n: int) -> np.ndarray:
    """Two uniforms per sample from Philox-4x64 keyed on ``(seed, sample index)``.

    Each sample owns an independent counter stream, so any subset of samples
    can be regenerated without the others.
    """
    out = np.empty((n, 2))
    for k in range(n):
        key = np.array([seed, k], dtype=np.uint64)
        out[k] = np.random.Generator(np.random.Philox(key=key)).random(2)
    return out


def draw_phases(temperature: float, n: int, seed: int) -> np.ndarray:
    """``(n, 2)`` motional phases for a given temperature."""
    return truncated_half_normal(sample_uniforms(seed, n), phase_scale(temperature))


def _zero_phase(config: SystemConfig) -> SystemConfig:
    return config.replace(theta1=0.0, theta2=0.0, phase_drift=False)


def batch_fidelities(params: PulseParams, config: SystemConfig, plan: PropagationPlan, thetas) -> np.ndarray:
    """Gate fidelity for each row ``(ϑ₁, ϑ₂)`` of ``thetas``, phases drifting over the gate."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    if thetas.shape[1] != 2:
        raise ValueError("thetas must have shape (n, 2)")
    if np.any(thetas < 0) or np.any(thetas > math.pi):
        raise InvalidParameterError("motional phases must lie in [0, pi]")
    model = plan.model
    h0 = hamiltonian_series(params, _zero_phase(config), plan.midpoints(), model)
    ops, _ = step_operators(h0, plan.step)
    ops_t = np.ascontiguousarray(np.swapaxes(ops, 1, 2))
    psi0 = initial_state(model).amplitudes
    target = target_state(model).amplitudes

    increment = plan.step / params.t_total
    half = 0.5 * plan.step / params.t_total
    out = np.empty(len(thetas))
    for start in range(0, len(thetas), BATCH):
        th = thetas[start : start + BATCH]
        # Frame at the first midpoint, then a constant rotation between midpoints.
        v_first = phase_frame(model, th[:, 0] * half, th[:, 1] * half)
        w = np.conj(phase_frame(model, th[:, 0] * increment, th[:, 1] * increment))
        chi = np.conj(v_first) * psi0
        chi = chi @ ops_t[0]
        for k in range(1, plan.n_steps):
            chi = (chi * w) @ ops_t[k]
        # The final frame acts as 1 on g/e levels, which is all the target sees.
        out[start : start + len(th)] = np.abs(chi @ np.conj(target)) ** 2
    return out


def fidelity_map(params: PulseParams, config: SystemConfig, plan: PropagationPlan, n: int = 21):
    """Fidelity on a uniform ``n × n`` grid over (ϑ₁, ϑ₂) ∈ [0, π]².

    Returns ``(grid, matrix)`` with ``matrix[i, j]`` at ``ϑ₁ = grid[i]``,
    ``ϑ₂ = grid[j]``.
    """
    if n < 2:
        raise InvalidParameterError("fidelity map needs at least 2 points per axis")
    grid = np.linspace(0.0, math.pi, n)
    t1, t2 = np.meshgrid(grid, grid, indexing="ij")
    fids = batch_fidelities(params, config, plan, np.column_stack([t1.ravel(), t2.ravel()]))
    return grid, fids.reshape(n, n)


def sample_fidelity_at_temperature(
    params: PulseParams,
    config: SystemConfig,
    plan: PropagationPlan,
    temperature: float,
    n: int,
    seed: int,
    return_samples: bool = False,
):
    """Mean fidelity over ``n`` motional-phase draws and its standard error.

    At zero temperature every phase is zero and the unperturbed fidelity is
    returned directly with zero error.
    """
    if n < 1:
        raise InvalidParameterError("need at least one sample")
    if temperature == 0:
        f0 = float(batch_fidelities(params, config, plan, [[0.0, 0.0]])[0])
        samples = [MotionalSample(0.0, 0.0, f0)] * n
        return (f0, 0.0, samples) if return_samples else (f0, 0.0)
    thetas = draw_phases(temperature, n, seed)
    fids = batch_fidelities(params, config, plan, thetas)
    mean = float(fids.mean())
    stderr = float(fids.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    if return_samples:
        samples = [MotionalSample(float(a), float(b), float(f)) for (a, b), f in zip(thetas, fids)]
        return mean, stderr, samples
    return mean, stderr


def temperature_sweep(
    params: PulseParams, config: SystemConfig, plan: PropagationPlan, temps, n: int, seed: int
) -> TemperatureSweepResult:
    """Mean fidelity at each temperature and an ordinary-least-squares line through them.

    The same per-sample streams are reused at every temperature, so the
    points differ only through the temperature.
    """
    temps = [float(t) for t in temps]
    if len(temps) < 3:
        raise InvalidParameterError("a temperature sweep needs at least 3 points")
    if max(temps) == min(temps):
        raise DegenerateFitError("all temperatures are equal; the fit abscissa is degenerate")
    means, errs = [], []
    for temp in temps:
        m, e = sample_fidelity_at_temperature(params, config, plan, temp, n, seed)
        means.append(m)
        errs.append(e)
    fit = linregress(temps, means)
    return TemperatureSweepResult(
        temperatures=tuple(temps),
        mean_fidelities=tuple(means),
        stderrs=tuple(errs),
        sample_counts=tuple([int(n)] * len(temps)),
        fit_slope=float(fit.slope),
        fit_intercept=float(fit.intercept),
        rng_seed=int(seed),
    )
