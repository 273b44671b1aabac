"""Time evolution under the (generally non-Hermitian) gate Hamiltonian.

The production path approximates H(t) as constant over each step, sampled
at the step midpoint, and applies ``P exp(-i D dt) P⁻¹`` from an
eigendecomposition of that constant matrix. :func:`propagate_rk` is an
independent classic RK4 integrator of the same equation, kept as a
cross-check.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.sparse.csgraph import connected_components

from .core import ANGULAR, InvalidParameterError, Model, PulseParams, QuantumState, SystemConfig, index_of
from .hamiltonian import HamiltonianSnapshot, hamiltonian_series

log = logging.getLogger(__name__)

#: Eigenvector condition number above which the exponential is recomputed
#: by scaling and squaring.
COND_LIMIT = 1e8
NORM_LIMIT = 1.0 + 1e-6
DEFAULT_DT = {"table1": 1e-4, "table2": 5e-4}


class NormGrowthError(RuntimeError):
    """The state norm grew beyond 1 + 1e-6."""


class StepSizeError(NormGrowthError):
    """The explicit integrator went unstable."""


@dataclass(frozen=True)
class PropagationPlan:
    """Time grid of one propagation.

    If ``(t_end - t_start)/dt`` is not an integer the step is shortened to
    the nearest size that tiles the window exactly; :attr:`step` is the size
    actually used.
    """

    dt: float
    t_start: float
    t_end: float
    model: Model = Model.FULL
    record_stride: int = 1

    def __post_init__(self):
        object.__setattr__(self, "model", Model(self.model))
        if not self.dt > 0:
            raise InvalidParameterError(f"dt must be positive, got {self.dt}")
        if not self.t_end > self.t_start:
            raise InvalidParameterError("t_end must be after t_start")
        if int(self.record_stride) < 1:
            raise InvalidParameterError("record_stride must be >= 1")
        object.__setattr__(self, "record_stride", int(self.record_stride))

    @classmethod
    def for_gate(cls, params: PulseParams, model: Model = Model.FULL, dt: float = 1e-4, record_stride: int = 1):
        return cls(dt, params.t_start, params.t_end, Model(model), record_stride)

    @property
    def n_steps(self) -> int:
        return max(1, math.ceil((self.t_end - self.t_start) / self.dt - 1e-9))

    @property
    def step(self) -> float:
        return (self.t_end - self.t_start) / self.n_steps

    def midpoints(self) -> np.ndarray:
        return self.t_start + (np.arange(self.n_steps) + 0.5) * self.step

    def record_indices(self) -> np.ndarray:
        idx = np.arange(0, self.n_steps + 1, self.record_stride)
        if idx[-1] != self.n_steps:
            idx = np.append(idx, self.n_steps)
        return idx

    def resolution(self, params: PulseParams) -> float:
        """``dt * max(|Δ|, Ω₀, Ω_B)`` in cycles per step.

        U(r) is left out on purpose: it only enters a time-independent
        diagonal entry, which the eigen-stepper treats exactly.
        """
        return self.step * max(abs(params.delta_big), params.omega0, params.omegaB)


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    final_state: QuantumState
    model: Model
    psi_plus: np.ndarray
    psi_minus: np.ndarray
    fallback_steps: tuple[int, ...] = ()
    metadata: dict = field(default_factory=dict)

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)

    def populations(self) -> np.ndarray:
        return np.abs(self.states) ** 2

    def population(self, label: str) -> np.ndarray:
        if label in ("psi+", "Psi+", "Ψ+"):
            return self.psi_plus
        if label in ("psi-", "Psi-", "Ψ-"):
            return self.psi_minus
        return np.abs(self.states[:, index_of(label, self.model)]) ** 2

    def amplitude(self, label: str) -> np.ndarray:
        return self.states[:, index_of(label, self.model)]


def _expm_eigen(h: np.ndarray, dt: float):
    """exp(-i 2π h dt) for a stack of matrices ``(n, k, k)``."""
    k = h.shape[-1]
    if k == 1:
        return np.exp(-1j * ANGULAR * dt * h), np.zeros(len(h), dtype=bool)
    if np.array_equal(h, np.conj(np.swapaxes(h, -1, -2))):
        w, p = np.linalg.eigh(h)
        return np.matmul(p * np.exp(-1j * ANGULAR * dt * w)[:, None, :], np.conj(np.swapaxes(p, -1, -2))), np.zeros(
            len(h), dtype=bool
        )
    w, p = np.linalg.eig(h)
    with np.errstate(all="ignore"):
        p_inv = np.linalg.inv(p)
        cond = np.abs(p).sum(axis=-2).max(axis=-1) * np.abs(p_inv).sum(axis=-2).max(axis=-1)
    ops = np.matmul(p * np.exp(-1j * ANGULAR * dt * w)[:, None, :], p_inv)
    bad = ~np.isfinite(cond) | (cond > COND_LIMIT)
    if bad.any():
        ops[bad] = scipy.linalg.expm(-1j * ANGULAR * dt * h[bad])
    return ops, bad


def _blocks(matrices: np.ndarray) -> list[np.ndarray]:
    """Index sets of the decoupled subspaces of a Hamiltonian stack."""
    coupled = np.any(matrices != 0, axis=0)
    n_comp, labels = connected_components(coupled | coupled.T, directed=False)
    return [np.flatnonzero(labels == c) for c in range(n_comp)]


def step_operators(matrices: np.ndarray, dt: float):
    """Per-step propagators exp(-i H_k dt) for a stack of Hamiltonians.

    Decoupled subspaces are diagonalised separately and consecutive
    identical snapshots share one decomposition; both are exact. Returns
    the operator stack and a boolean mask of steps that needed the
    scaling-and-squaring fallback.
    """
    matrices = np.asarray(matrices, dtype=complex)
    n, d, _ = matrices.shape
    ops = np.zeros_like(matrices)
    fallback = np.zeros(n, dtype=bool)
    for idx in _blocks(matrices):
        sub = matrices[:, idx[:, None], idx[None, :]]
        fresh = np.ones(n, dtype=bool)
        fresh[1:] = np.any(sub[1:] != sub[:-1], axis=(1, 2))
        uniq = np.flatnonzero(fresh)
        sub_ops, bad = _expm_eigen(sub[uniq], dt)
        owner = np.maximum.accumulate(np.where(fresh, np.arange(n), 0))
        pos = np.searchsorted(uniq, owner)
        ops[:, idx[:, None], idx[None, :]] = sub_ops[pos]
        fallback |= bad[pos]
    return ops, fallback


def exponential(h: HamiltonianSnapshot | np.ndarray, dt: float):
    """exp(-i H dt) for one matrix, with a flag telling whether the fallback was used."""
    m = h.matrix if isinstance(h, HamiltonianSnapshot) else np.asarray(h, dtype=complex)
    ops, bad = step_operators(m[None], dt)
    return ops[0], bool(bad[0])


def step_eigen(state: QuantumState, h: HamiltonianSnapshot, dt: float) -> QuantumState:
    """Advance ``state`` by one step of length ``dt`` under constant ``h``."""
    if h.dim != state.dim:
        raise InvalidParameterError(f"Hamiltonian dimension {h.dim} does not match state dimension {state.dim}")
    op, _ = exponential(h, dt)
    return QuantumState(op @ state.amplitudes, state.model)


def _check_initial(initial: QuantumState, plan: PropagationPlan):
    if initial.model is not plan.model:
        raise InvalidParameterError(
            f"initial state is in the {initial.model.value} model but the plan uses {plan.model.value}"
        )
    if initial.representation != "product":
        raise InvalidParameterError("propagation works in the product basis")
    if initial.norm() > 1.0 + 1e-9:
        raise InvalidParameterError(f"initial state norm {initial.norm()} exceeds 1")


def _symmetric_populations(states, times, params, config, model):
    gr, rg = index_of("gr", model), index_of("rg", model)
    ph1, ph2 = config.phases_at(times, params)
    a = np.exp(-1j * ph1) * states[:, gr]
    b = np.exp(-1j * ph2) * states[:, rg]
    return np.abs(a + b) ** 2 / 2, np.abs(a - b) ** 2 / 2


def _trajectory(states, times, params, config, plan, fallback, **metadata):
    plus, minus = _symmetric_populations(states, times, params, config, plan.model)
    return Trajectory(
        times=times,
        states=states,
        final_state=QuantumState(states[-1], plan.model),
        model=plan.model,
        psi_plus=plus,
        psi_minus=minus,
        fallback_steps=tuple(int(i) for i in np.flatnonzero(fallback)),
        metadata=dict(metadata, dt=plan.step, n_steps=plan.n_steps),
    )


def propagate(initial: QuantumState, params: PulseParams, config: SystemConfig, plan: PropagationPlan) -> Trajectory:
    """Evolve ``initial`` over the plan window by midpoint eigen-stepping."""
    _check_initial(initial, plan)
    h = hamiltonian_series(params, config, plan.midpoints(), plan.model)
    ops, fallback = step_operators(h, plan.step)
    if fallback.any():
        log.warning("%d step(s) used the scaling-and-squaring fallback", int(fallback.sum()))

    record = plan.record_indices()
    states = np.empty((record.size, initial.dim), dtype=complex)
    psi = initial.amplitudes.copy()
    states[0] = psi
    slot = 1
    for k in range(plan.n_steps):
        psi = ops[k] @ psi
        norm2 = np.vdot(psi, psi).real
        if not norm2 <= NORM_LIMIT**2:
            raise NormGrowthError(f"norm reached {math.sqrt(norm2):.9f} at step {k}")
        if slot < record.size and record[slot] == k + 1:
            states[slot] = psi
            slot += 1
    times = plan.t_start + record * plan.step
    return _trajectory(states, times, params, config, plan, fallback, method="eigen")


def propagate_rk(
    initial: QuantumState, params: PulseParams, config: SystemConfig, plan: PropagationPlan, chunk: int = 4096
) -> Trajectory:
    """Classic fourth-order Runge-Kutta integration of the same dynamics.

    Explicit, so ``plan.dt`` must resolve every frequency in H (including
    U(r)); an unstable step size shows up as norm growth and raises
    :class:`StepSizeError`.
    """
    _check_initial(initial, plan)
    n, dt = plan.n_steps, plan.step
    record = plan.record_indices()
    states = np.empty((record.size, initial.dim), dtype=complex)
    psi = initial.amplitudes.copy()
    states[0] = psi
    slot = 1
    scale = -1j * ANGULAR
    for start in range(0, n, chunk):
        stop = min(n, start + chunk)
        grid = plan.t_start + np.arange(2 * start, 2 * stop + 1) * (dt / 2)
        hs = scale * hamiltonian_series(params, config, grid, plan.model)
        for k in range(start, stop):
            j = 2 * (k - start)
            h0, hm, h1 = hs[j], hs[j + 1], hs[j + 2]
            k1 = h0 @ psi
            k2 = hm @ (psi + 0.5 * dt * k1)
            k3 = hm @ (psi + 0.5 * dt * k2)
            k4 = h1 @ (psi + dt * k3)
            psi = psi + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            norm2 = np.vdot(psi, psi).real
            if not norm2 <= NORM_LIMIT**2:
                raise StepSizeError(f"RK4 norm reached {math.sqrt(norm2) if np.isfinite(norm2) else norm2} at step {k}; dt too large")
            if slot < record.size and record[slot] == k + 1:
                states[slot] = psi
                slot += 1
    times = plan.t_start + record * dt
    return _trajectory(states, times, params, config, plan, np.zeros(n, dtype=bool), method="rk4")
