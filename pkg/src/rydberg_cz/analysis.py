"""Gate figures of merit: fidelity, dressed-state phases and Rabi frequencies."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.signal import find_peaks

from .core import ANGULAR, PulseParams, QuantumState, SystemConfig, basis, target_state
from .hamiltonian import effective_rabi
from .propagator import PropagationPlan, Trajectory


class DressedStateSingularity(ArithmeticError):
    """The |rr⟩ elimination denominator 2U + 4δ' - 4E_R vanished."""


class PhaseReferenceError(ValueError):
    """The |ee⟩ amplitude is too small to serve as a phase reference."""


class FlatSignalError(ValueError):
    """No oscillation found in a population trace."""


@dataclass(frozen=True)
class GateResult:
    fidelity: float
    final_norm: float
    phi_gg: float
    phi_ge: float
    phi: float
    rydberg_time: float


@dataclass(frozen=True, eq=False)
class PhaseTrace:
    times: np.ndarray
    phi_gg: np.ndarray
    phi_ge: np.ndarray

    @property
    def phi(self) -> np.ndarray:
        return self.phi_gg - 2.0 * self.phi_ge


def fidelity(final: QuantumState, target: QuantumState) -> float:
    """|⟨final|target⟩|². A lossy (sub-normalised) final state lowers it directly."""
    if final.dim != target.dim:
        raise ValueError(f"dimension mismatch: {final.dim} vs {target.dim}")
    return float(abs(np.vdot(final.amplitudes, target.amplitudes)) ** 2)


def stark_shifts(params: PulseParams, t):
    """Light shifts (E_R(t), E_B) = (Ω_R²(t)/4Δ, Ω_B²/4Δ)."""
    e_r = np.asarray(params.omega_r(t)) ** 2 / (4.0 * params.delta_big)
    e_b = params.omegaB**2 / (4.0 * params.delta_big)
    return (e_r if e_r.ndim else float(e_r)), e_b


def dressed_energies(params: PulseParams, config: SystemConfig, t):
    """Energies of the dressed levels adiabatically connected to |gg⟩ and |ge⟩.

    Returns ``(eps_gg, eps_ge)`` in 2π·MHz, elementwise over ``t``.
    """
    e_r, e_b = stark_shifts(params, t)
    e_r = np.asarray(e_r, dtype=float)
    omega_eff = np.asarray(effective_rabi(params, t), dtype=float)
    d1 = params.delta_small - e_b + e_r
    denom = 2.0 * config.interaction + 4.0 * d1 - 4.0 * e_r
    if np.any(np.abs(denom) < 1e-9):
        raise DressedStateSingularity("2U + 4δ' - 4E_R vanishes; the |rr⟩ elimination is singular")
    d2 = d1 - omega_eff**2 / denom
    eps_gg = 0.5 * (d2 - 4.0 * e_r + np.sqrt(d2**2 + 2.0 * omega_eff**2))
    eps_ge = 0.5 * (d1 - 2.0 * e_r + np.sqrt(d1**2 + omega_eff**2))
    if eps_gg.ndim == 0:
        return float(eps_gg), float(eps_ge)
    return eps_gg, eps_ge


def _grid(plan: PropagationPlan) -> np.ndarray:
    return plan.t_start + np.arange(plan.n_steps + 1) * plan.step


def phase_trace(params: PulseParams, config: SystemConfig, plan: PropagationPlan) -> PhaseTrace:
    """Running adiabatic phases φ_gg(t), φ_ge(t) (rad) on the plan's grid."""
    times = _grid(plan)
    eps_gg, eps_ge = dressed_energies(params, config, times)
    return PhaseTrace(
        times,
        ANGULAR * cumulative_trapezoid(eps_gg, times, initial=0.0),
        ANGULAR * cumulative_trapezoid(eps_ge, times, initial=0.0),
    )


def accumulate_phases(params: PulseParams, config: SystemConfig, plan: PropagationPlan):
    """Adiabatic gate phases ``(phi_gg, phi_ge, phi)`` with ``phi = phi_gg - 2*phi_ge``."""
    trace = phase_trace(params, config, plan)
    phi_gg, phi_ge = float(trace.phi_gg[-1]), float(trace.phi_ge[-1])
    return phi_gg, phi_ge, phi_gg - 2.0 * phi_ge


def _relative(amps_gg, amps_ge, amps_ee):
    amps_ee = np.asarray(amps_ee)
    if np.any(np.abs(amps_ee) < 1e-6):
        raise PhaseReferenceError("|ee⟩ amplitude below 1e-6, no phase reference")
    return -np.angle(amps_gg / amps_ee), -np.angle(amps_ge / amps_ee)


def extract_phase_from_state(final: QuantumState):
    """Phases ``(phi_gg, phi_ge)`` read off a state written as e^{-iφ}|..⟩, relative to |ee⟩.

    Principal values in (-π, π]; use :func:`extract_phase_trace` to follow
    the phases continuously through a trajectory.
    """
    phi_gg, phi_ge = _relative(final["gg"], final["ge"], final["ee"])
    return float(phi_gg), float(phi_ge)


def extract_phase_trace(trajectory: Trajectory) -> PhaseTrace:
    """Dynamical phases along a trajectory, unwrapped in time."""
    phi_gg, phi_ge = _relative(
        trajectory.amplitude("gg"), trajectory.amplitude("ge"), trajectory.amplitude("ee")
    )
    return PhaseTrace(trajectory.times, np.unwrap(phi_gg), np.unwrap(phi_ge))


def wrap_phase(phi):
    """Map a phase into [0, 2π)."""
    return np.mod(phi, 2.0 * np.pi)


def rydberg_time(trajectory: Trajectory) -> float:
    """Time an atom spends in |r⟩ per unit of initial |g⟩ population (µs), averaged over both atoms.

    Only an atom in |g⟩ is laser coupled, so each atom's integrated |r⟩
    population is normalised by its initial |g⟩ population. For the
    equal-superposition input this is twice the unconditional value.
    """
    labels = basis(trajectory.model)
    pops = trajectory.populations()
    total = 0.0
    for atom in (0, 1):
        in_r = pops[:, [k for k, lab in enumerate(labels) if lab[atom] == "r"]].sum(axis=1)
        in_g = pops[0, [k for k, lab in enumerate(labels) if lab[atom] == "g"]].sum()
        if in_g < 1e-12:
            raise ValueError("atom starts with no |g⟩ population; Rydberg time undefined")
        total += np.trapezoid(in_r, trajectory.times) / in_g
    return float(total / 2)


def gate_result(trajectory: Trajectory, target: QuantumState | None = None) -> GateResult:
    final = trajectory.final_state
    target = target_state(final.model) if target is None else target
    trace = extract_phase_trace(trajectory)
    phi_gg, phi_ge = float(trace.phi_gg[-1]), float(trace.phi_ge[-1])
    return GateResult(
        fidelity=fidelity(final, target),
        final_norm=final.norm(),
        phi_gg=phi_gg,
        phi_ge=phi_ge,
        phi=phi_gg - 2.0 * phi_ge,
        rydberg_time=rydberg_time(trajectory),
    )


def _refine(signal, k):
    """Sub-sample extremum location by a parabola through three samples."""
    if k <= 0 or k >= len(signal) - 1:
        return float(k)
    y0, y1, y2 = signal[k - 1], signal[k], signal[k + 1]
    curv = y0 - 2 * y1 + y2
    return float(k) if curv == 0 else k + 0.5 * (y0 - y2) / curv


def rabi_frequency(trajectory: Trajectory, population_label: str) -> float:
    """Dominant oscillation frequency of a population trace.

    Extrema are located with sub-sample refinement and the half period is
    the slope of a straight-line fit of extremum time against index. The
    result is in MHz, i.e. numerically equal to the Rabi frequency in
    2π·MHz units (a population sin²(Ωt/2) oscillates at Ω).
    """
    signal = np.asarray(trajectory.population(population_label), dtype=float)
    times = np.asarray(trajectory.times, dtype=float)
    span = float(signal.max() - signal.min())
    if span < 1e-9:
        raise FlatSignalError(f"population of {population_label} does not oscillate")
    prominence = 0.25 * span
    maxima, _ = find_peaks(signal, prominence=prominence)
    minima, _ = find_peaks(-signal, prominence=prominence)
    extrema = np.sort(np.concatenate([maxima, minima]))
    if extrema.size < 2:
        raise FlatSignalError(f"fewer than two extrema in the population of {population_label}")
    positions = np.array([_refine(signal, int(k)) for k in extrema])
    when = np.interp(positions, np.arange(times.size), times)
    half_period = np.polyfit(np.arange(when.size), when, 1)[0]
    return float(1.0 / (2.0 * half_period))

