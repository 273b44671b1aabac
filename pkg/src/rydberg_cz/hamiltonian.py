"""Two-atom Hamiltonians in the rotating frame.

Two models are provided:

``Model.FULL``
    Four levels per atom (g, e, i, r), 16×16. The red laser couples g-i with
    Ω_R(t), the blue laser couples i-r with Ω_B, and loss enters as
    ``-1j*gamma`` on the i and r diagonals.

``Model.EFFECTIVE``
    The intermediate level eliminated, three levels per atom (g, e, r), 9×9.
    g carries the light shift ``-Ω_R²/4Δ``, r carries ``δ - Ω_B²/4Δ - iγ_r``
    and g-r are coupled by ``Ω̃/2`` with ``Ω̃ = Ω_B Ω_R / 2Δ``.

In both, |rr⟩ is shifted by U(r) = C₃/r³ and |e⟩ has zero energy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    InvalidParameterError,
    Model,
    PulseParams,
    QuantumState,
    SystemConfig,
    index_of,
)

_TIME_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class HamiltonianSnapshot:
    matrix: np.ndarray
    model: Model

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (Model(self.model).dim,) * 2:
            raise InvalidParameterError(f"matrix shape {m.shape} does not match the {Model(self.model).value} model")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "model", Model(self.model))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def element(self, bra: str, ket: str) -> complex:
        return complex(self.matrix[index_of(bra, self.model), index_of(ket, self.model)])


def effective_rabi(params: PulseParams, t):
    """Two-photon Rabi frequency Ω̃(t) = Ω_B Ω_R(t) / 2Δ."""
    return params.omegaB * params.omega_r(t) / (2.0 * params.delta_big)


def _single_atom(params: PulseParams, config: SystemConfig, times: np.ndarray, phases: np.ndarray, model: Model):
    n = times.size
    omega_r = np.broadcast_to(params.omega_r(times), (n,))
    if model is Model.FULL:
        g, i, r = 0, 2, 3
        h = np.zeros((n, 4, 4), dtype=complex)
        h[:, i, i] = params.delta_big - 1j * config.gamma_i
        h[:, r, r] = params.delta_small - 1j * config.gamma_r
        h[:, g, i] = -0.5 * omega_r * np.exp(1j * phases)
        h[:, i, g] = np.conj(h[:, g, i])
        h[:, i, r] = -0.5 * params.omegaB * np.exp(1j * phases)
        h[:, r, i] = np.conj(h[:, i, r])
        return h
    g, r = 0, 2
    delta = params.delta_big
    h = np.zeros((n, 3, 3), dtype=complex)
    h[:, g, g] = -(omega_r**2) / (4.0 * delta)
    h[:, r, r] = params.delta_small - params.omegaB**2 / (4.0 * delta) - 1j * config.gamma_r
    h[:, g, r] = -0.5 * (params.omegaB * omega_r / (2.0 * delta)) * np.exp(-1j * phases)
    h[:, r, g] = np.conj(h[:, g, r])
    return h


def hamiltonian_series(params: PulseParams, config: SystemConfig, times, model: Model = Model.FULL) -> np.ndarray:
    """Stack of Hamiltonian matrices, shape ``(len(times), d, d)``.

    The vectorised workhorse behind :func:`build_full` and
    :func:`build_effective`.
    """
    model = Model(model)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    phase1, phase2 = config.phases_at(times, params)
    h1 = _single_atom(params, config, times, np.asarray(phase1), model)
    h2 = _single_atom(params, config, times, np.asarray(phase2), model)
    levels = h1.shape[-1]
    eye = np.eye(levels)
    d = levels * levels
    out = np.einsum("nab,cd->nacbd", h1, eye).reshape(-1, d, d)
    out += np.einsum("ab,ncd->nacbd", eye, h2).reshape(-1, d, d)
    out[:, d - 1, d - 1] += config.interaction
    return out


def _check_time(params: PulseParams, t: float):
    if not (params.t_start - _TIME_SLACK <= t <= params.t_end + _TIME_SLACK):
        raise InvalidParameterError(f"t={t} lies outside the gate window [{params.t_start}, {params.t_end}]")


def build_full(params: PulseParams, config: SystemConfig, t: float) -> HamiltonianSnapshot:
    _check_time(params, t)
    return HamiltonianSnapshot(hamiltonian_series(params, config, [t], Model.FULL)[0], Model.FULL)


def build_effective(params: PulseParams, config: SystemConfig, t: float) -> HamiltonianSnapshot:
    _check_time(params, t)
    return HamiltonianSnapshot(hamiltonian_series(params, config, [t], Model.EFFECTIVE)[0], Model.EFFECTIVE)


def build(model: Model, params: PulseParams, config: SystemConfig, t: float) -> HamiltonianSnapshot:
    return build_full(params, config, t) if Model(model) is Model.FULL else build_effective(params, config, t)


def phase_frame(model: Model, phase1, phase2) -> np.ndarray:
    """Diagonal ``v`` with ``H(phase1, phase2) = diag(v) H(0, 0) diag(v)*``.

    Returns shape ``(n, d)`` for array phases. The ground and qubit levels
    always carry 1, so populations and g/e amplitudes are frame independent.
    """
    model = Model(model)
    phase1 = np.atleast_1d(np.asarray(phase1, dtype=float))
    phase2 = np.atleast_1d(np.asarray(phase2, dtype=float))

    def per_atom(phase):
        v = np.ones(phase.shape + (len(model.levels),), dtype=complex)
        if model is Model.FULL:
            v[..., 2] = np.exp(-1j * phase)
            v[..., 3] = np.exp(-2j * phase)
        else:
            v[..., 2] = np.exp(1j * phase)
        return v

    v1, v2 = per_atom(phase1), per_atom(phase2)
    return np.einsum("...a,...b->...ab", v1, v2).reshape(v1.shape[:-1] + (-1,))


def symmetric_basis_transform(state: QuantumState, config: SystemConfig, inverse: bool = False) -> QuantumState:
    """Swap the {|gr⟩, |rg⟩} amplitudes for {|Ψ+⟩, |Ψ-⟩}.

    |Ψ±⟩ = (e^{iϑ₁}|gr⟩ ± e^{iϑ₂}|rg⟩)/√2 with the static phases of
    ``config``. ``inverse=True`` maps a symmetric-representation state back
    to the product basis.
    """
    gr = index_of("gr", state.model)
    rg = index_of("rg", state.model)
    amps = state.amplitudes.copy()
    p1, p2 = np.exp(1j * config.theta1), np.exp(1j * config.theta2)
    s = 1.0 / np.sqrt(2.0)
    if not inverse:
        if state.representation != "product":
            raise InvalidParameterError("state is already in the symmetric representation")
        a, b = amps[gr], amps[rg]
        amps[gr] = s * (np.conj(p1) * a + np.conj(p2) * b)
        amps[rg] = s * (np.conj(p1) * a - np.conj(p2) * b)
        return QuantumState(amps, state.model, "symmetric")
    if state.representation != "symmetric":
        raise InvalidParameterError("state is not in the symmetric representation")
    plus, minus = amps[gr], amps[rg]
    amps[gr] = s * p1 * (plus + minus)
    amps[rg] = s * p2 * (plus - minus)
    return QuantumState(amps, state.model, "product")
