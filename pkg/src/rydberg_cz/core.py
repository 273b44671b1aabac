"""Basis labels, states, parameter records and pulse shapes.

Units used throughout the package:

* frequencies and energies are angular frequencies expressed in units of
  2π·MHz (a stored value of 300 means 2π × 300 MHz),
* times are in µs,
* ħ = 1, so a phase in radians is ``ANGULAR * frequency * time``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Mapping, NamedTuple

import numpy as np

#: Converts (2π·MHz) × µs into radians.
ANGULAR = 2.0 * math.pi

#: Interaction coefficient C₃ of the Förster-enhanced pair, MHz·µm³.
DEFAULT_C3 = 3200.0


class InvalidParameterError(ValueError):
    """A parameter record violates one of its invariants."""


class Model(str, Enum):
    FULL = "full"
    EFFECTIVE = "effective"

    @property
    def levels(self) -> tuple[str, ...]:
        return ("g", "e", "i", "r") if self is Model.FULL else ("g", "e", "r")

    @property
    def dim(self) -> int:
        return len(self.levels) ** 2


class Shape(str, Enum):
    GAUSSIAN = "gaussian"
    FLATTOP = "flattop"


class BasisLabel(NamedTuple):
    atom1: str
    atom2: str

    def __str__(self) -> str:
        return self.atom1 + self.atom2


def basis(model: Model) -> tuple[BasisLabel, ...]:
    """Two-atom product basis, atom 1 major.

    For the full model the order is gg, ge, gi, gr, eg, ee, ..., rr (16
    labels); the effective model drops ``i`` (9 labels). ``rr`` is always the
    last entry.
    """
    levels = Model(model).levels
    return tuple(BasisLabel(a, b) for a in levels for b in levels)


def index_of(label: str | BasisLabel, model: Model) -> int:
    levels = Model(model).levels
    a, b = (label.atom1, label.atom2) if isinstance(label, BasisLabel) else tuple(label)
    try:
        return levels.index(a) * len(levels) + levels.index(b)
    except ValueError:
        raise KeyError(f"{label!r} is not a basis label of the {Model(model).value} model") from None


@dataclass(frozen=True, eq=False)
class QuantumState:
    """Complex amplitudes over the two-atom basis of ``model``.

    ``representation`` is ``"product"`` for the plain product basis, or
    ``"symmetric"`` when the ``gr``/``rg`` slots hold the |Ψ+⟩/|Ψ-⟩
    amplitudes (see :func:`rydberg_cz.hamiltonian.symmetric_basis_transform`).
    """

    amplitudes: np.ndarray
    model: Model = Model.FULL
    representation: str = "product"

    def __post_init__(self):
        model = Model(self.model)
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != model.dim:
            raise InvalidParameterError(
                f"state has {amps.size} amplitudes, the {model.value} model needs {model.dim}"
            )
        if self.representation not in ("product", "symmetric"):
            raise InvalidParameterError(f"unknown representation {self.representation!r}")
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "model", model)

    @classmethod
    def from_labels(cls, amplitudes: Mapping[str, complex], model: Model = Model.FULL) -> "QuantumState":
        vec = np.zeros(Model(model).dim, dtype=complex)
        for label, amp in amplitudes.items():
            vec[index_of(label, model)] = amp
        return cls(vec, model)

    def __getitem__(self, label: str | BasisLabel) -> complex:
        return complex(self.amplitudes[index_of(label, self.model)])

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def population(self, label: str | BasisLabel) -> float:
        return abs(self[label]) ** 2


def initial_state(model: Model = Model.FULL) -> QuantumState:
    """Equal superposition (|gg⟩ + |ge⟩ + |eg⟩ + |ee⟩)/2."""
    return QuantumState.from_labels({"gg": 0.5, "ge": 0.5, "eg": 0.5, "ee": 0.5}, model)


def target_state(model: Model = Model.FULL) -> QuantumState:
    """Ideal CZ output (-|gg⟩ + |ge⟩ + |eg⟩ + |ee⟩)/2."""
    return QuantumState.from_labels({"gg": -0.5, "ge": 0.5, "eg": 0.5, "ee": 0.5}, model)


def pulse_gaussian(t, omega0: float, tau: float):
    """Gaussian red-laser envelope ``omega0 * exp(-(t/tau)**2)``, t centred on the gate."""
    if tau <= 0:
        raise InvalidParameterError("tau must be positive")
    t = np.asarray(t, dtype=float)
    out = omega0 * np.exp(-((t / tau) ** 2))
    return out if out.ndim else float(out)


def pulse_flattop(t, omega0: float, tau: float, t_total: float):
    """Flat-top envelope with Gaussian shoulders.

    Constant ``omega0`` for ``|t| <= t_total/2 - tau``; outside the plateau
    the value is ``omega0 * exp(-(|t| - edge)**2 / (tau**2 / 8))`` where
    ``edge = t_total/2 - tau``, so the pulse falls to ``omega0 * e**-8`` at
    the gate boundaries.
    """
    if tau <= 0:
        raise InvalidParameterError("tau must be positive")
    if t_total < 2 * tau:
        raise InvalidParameterError(f"flat-top pulse needs t_total >= 2*tau (got T={t_total}, tau={tau})")
    t = np.asarray(t, dtype=float)
    excess = np.abs(t) - (t_total / 2 - tau)
    shoulder = np.exp(-np.square(np.maximum(excess, 0.0)) / (tau * tau / 8.0))
    out = omega0 * shoulder
    return out if out.ndim else float(out)


def interaction_energy(r: float, c3: float = DEFAULT_C3) -> float:
    """Dipole-dipole shift C₃/r³ of |rr⟩ (2π·MHz for c3 in MHz·µm³, r in µm)."""
    if r <= 0:
        raise InvalidParameterError(f"atom separation must be positive, got {r}")
    return c3 / r**3


PARAMETER_NAMES = ("omega0", "omegaB", "delta_big", "delta_small")


@dataclass(frozen=True)
class PulseParams:
    """Controllable laser parameters.

    ``omega0`` peak red Rabi frequency, ``omegaB`` blue Rabi frequency,
    ``delta_big`` single-photon detuning, ``delta_small`` two-photon detuning
    (all 2π·MHz); ``tau`` Gaussian width or flat-top rise time and
    ``t_total`` gate duration (µs).
    """

    omega0: float
    omegaB: float
    delta_big: float
    delta_small: float = 0.0
    shape: Shape = Shape.GAUSSIAN
    tau: float = 0.1
    t_total: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "shape", Shape(self.shape))
        for name in PARAMETER_NAMES + ("tau", "t_total"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise InvalidParameterError(f"{name} must be finite, got {value}")
        if self.omega0 <= 0:
            raise InvalidParameterError(f"omega0 must be positive, got {self.omega0}")
        if self.omegaB <= 0:
            raise InvalidParameterError(f"omegaB must be positive, got {self.omegaB}")
        if self.delta_big == 0:
            raise InvalidParameterError("delta_big must be nonzero")
        if self.tau <= 0:
            raise InvalidParameterError(f"tau must be positive, got {self.tau}")
        if self.t_total <= 0:
            raise InvalidParameterError(f"t_total must be positive, got {self.t_total}")
        if self.shape is Shape.FLATTOP and self.t_total < 2 * self.tau:
            raise InvalidParameterError(
                f"flat-top pulse needs t_total >= 2*tau (got T={self.t_total}, tau={self.tau})"
            )

    @property
    def t_start(self) -> float:
        return -self.t_total / 2

    @property
    def t_end(self) -> float:
        return self.t_total / 2

    def omega_r(self, t):
        """Red-laser Rabi frequency Ω_R(t)."""
        if self.shape is Shape.GAUSSIAN:
            return pulse_gaussian(t, self.omega0, self.tau)
        return pulse_flattop(t, self.omega0, self.tau, self.t_total)

    def vector(self, names: Iterable[str] = PARAMETER_NAMES) -> np.ndarray:
        return np.array([getattr(self, n) for n in names], dtype=float)

    def with_vector(self, values, names: Iterable[str] = PARAMETER_NAMES) -> "PulseParams":
        return replace(self, **{n: float(v) for n, v in zip(names, values)})

    def replace(self, **changes) -> "PulseParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class SystemConfig:
    """Fixed physics of the atom pair.

    ``theta1``/``theta2`` are the per-atom laser phases. With
    ``phase_drift=False`` they are static coupling phases (which a change of
    basis removes, so they never change a gate fidelity). With
    ``phase_drift=True`` each atom's phase grows linearly from 0 at the start
    of the gate to ``theta_j`` at its end, which is how motion through the
    light field enters the motional studies.
    """

    separation: float = 3.0
    c3: float = DEFAULT_C3
    gamma_i: float = 0.0
    gamma_r: float = 0.0
    theta1: float = 0.0
    theta2: float = 0.0
    phase_drift: bool = False

    def __post_init__(self):
        if not self.separation > 0:
            raise InvalidParameterError(f"separation must be positive, got {self.separation}")
        if self.gamma_i < 0 or self.gamma_r < 0:
            raise InvalidParameterError("loss rates must be non-negative")
        for name in ("theta1", "theta2"):
            value = getattr(self, name)
            if not 0.0 <= value <= math.pi:
                raise InvalidParameterError(f"{name} must lie in [0, pi], got {value}")

    @property
    def interaction(self) -> float:
        return interaction_energy(self.separation, self.c3)

    def phases_at(self, t, params: PulseParams):
        """Coupling phases (atom 1, atom 2) at time ``t``."""
        if not self.phase_drift:
            t = np.asarray(t, dtype=float)
            return np.full(t.shape, self.theta1), np.full(t.shape, self.theta2)
        frac = (np.asarray(t, dtype=float) - params.t_start) / params.t_total
        return self.theta1 * frac, self.theta2 * frac

    def replace(self, **changes) -> "SystemConfig":
        return replace(self, **changes)


# Reference parameter rows.
TABLE1_INITIAL = PulseParams(300.0, 300.0, 1000.0, 0.0, Shape.GAUSSIAN, tau=0.1, t_total=0.5)
TABLE1_OPTIMISED = PulseParams(304.66, 292.55, 974.78, 0.0, Shape.GAUSSIAN, tau=0.1, t_total=0.5)
TABLE1_SYSTEM = SystemConfig(separation=0.3)

TABLE2_INITIAL = PulseParams(49.0, 28.0, 500.0, 0.0, Shape.FLATTOP, tau=0.3, t_total=2.0)
TABLE2_OPTIMISED = PulseParams(52.31, 26.85, 496.81, -1.12, Shape.FLATTOP, tau=0.3, t_total=2.0)
TABLE2_SYSTEM = SystemConfig(separation=3.0, gamma_i=5.75, gamma_r=0.0048)
#: Endpoint of this package's own bounded optimisation from TABLE2_INITIAL
#: (effective model, dt = 5e-4 µs, 400 iterations), rounded to 0.01.
TABLE2_REPRODUCED = PulseParams(50.81, 25.65, 499.96, -0.99, Shape.FLATTOP, tau=0.3, t_total=2.0)
