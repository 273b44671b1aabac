"""Named scenarios: each turns a :class:`ScenarioConfig` into a summary and tables."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .analysis import (
    accumulate_phases,
    extract_phase_trace,
    gate_result,
    phase_trace,
    rabi_frequency,
    stark_shifts,
    wrap_phase,
)
from .config import ScenarioConfig
from .core import Model, PulseParams, QuantumState, Shape, initial_state
from .hamiltonian import effective_rabi
from .motional import fidelity_map, phase_scale, temperature_sweep
from .optimizer import OptimizationTrace, optimize
from .propagator import PropagationPlan, propagate, propagate_rk

#: Exit status when the optimiser stopped without meeting a convergence test.
EXIT_NOT_CONVERGED = 4


@dataclass
class Table:
    header: list[str]
    rows: list[list]


@dataclass
class ScenarioOutput:
    summary: dict
    tables: dict[str, Table] = field(default_factory=dict)
    jsonl: dict[str, str] = field(default_factory=dict)
    status: int = 0


def _params_dict(params: PulseParams) -> dict:
    return {
        "omega0": params.omega0,
        "omegaB": params.omegaB,
        "delta_big": params.delta_big,
        "delta_small": params.delta_small,
        "shape": params.shape.value,
        "tau": params.tau,
        "t_total": params.t_total,
    }


def _populations_table(trajectory, model: Model) -> Table:
    labels = ["gg", "ge", "eg", "ee", "rr"]
    header = ["t_us"] + [f"P_{lab}" for lab in labels] + ["P_psi_plus", "P_psi_minus", "norm"]
    pops = [trajectory.population(lab) for lab in labels]
    rows = [
        [t, *(p[k] for p in pops), trajectory.psi_plus[k], trajectory.psi_minus[k], n]
        for k, (t, n) in enumerate(zip(trajectory.times, trajectory.norms))
    ]
    return Table(header, rows)


def _stride(plan: PropagationPlan, records: int = 500) -> int:
    return max(1, plan.n_steps // records)


def _gate_summary(params: PulseParams, cfg: ScenarioConfig, record_stride: int = 1):
    plan = PropagationPlan.for_gate(params, cfg.model, cfg.dt, record_stride)
    trajectory = propagate(initial_state(cfg.model), params, cfg.system, plan)
    result = gate_result(trajectory)
    _, _, phi_dressed = accumulate_phases(params, cfg.system, plan)
    summary = {
        "fidelity": result.fidelity,
        "infidelity": 1.0 - result.fidelity,
        "final_norm": result.final_norm,
        "phi": result.phi,
        "phi_mod_2pi": float(wrap_phase(result.phi)),
        "phi_gg": result.phi_gg,
        "phi_ge": result.phi_ge,
        "phi_dressed": phi_dressed,
        "phi_dressed_mod_2pi": float(wrap_phase(phi_dressed)),
        "rydberg_time_us": result.rydberg_time,
        "max_P_rr": float(trajectory.population("rr").max()),
        "max_P_psi_plus": float(trajectory.psi_plus.max()),
        "fallback_steps": len(trajectory.fallback_steps),
        "dt_used": plan.step,
    }
    return summary, trajectory


def _trace_table(trace: OptimizationTrace) -> Table:
    header = ["iteration", *trace.names, "infidelity", "gradient_norm", "step"]
    rows = [[r.iteration, *r.params, r.infidelity, r.gradient_norm, r.step] for r in trace.iterations]
    return Table(header, rows)


def run_optimisation(cfg: ScenarioConfig) -> ScenarioOutput:
    """``table1`` and ``table2``: optimise from the initial row and report the gate."""
    plan = PropagationPlan.for_gate(cfg.params, cfg.model, cfg.dt)
    trace = optimize(cfg.params, cfg.bounds, cfg.system, plan, budget=cfg.max_iters, names=cfg.active)
    final = trace.final_params
    initial_infidelity = trace.iterations[0].infidelity
    gate, trajectory = _gate_summary(final, cfg, _stride(plan))
    summary = {
        "initial_params": _params_dict(cfg.params),
        "initial_infidelity": initial_infidelity,
        "initial_fidelity": 1.0 - initial_infidelity,
        "optimised_params": _params_dict(final),
        "optimiser_status": trace.status,
        "converged": trace.converged,
        "iterations": len(trace.iterations) - 1,
        "objective_evaluations": trace.evaluations,
        "active_parameters": list(trace.names),
        **gate,
    }
    return ScenarioOutput(
        summary,
        {"trace.csv": _trace_table(trace), "populations.csv": _populations_table(trajectory, cfg.model)},
        {"trace.jsonl": trace.to_jsonl()},
        status=0 if trace.converged else EXIT_NOT_CONVERGED,
    )


def run_phase_trace(cfg: ScenarioConfig) -> ScenarioOutput:
    """Dressed-state phases against the phases read off the propagated state."""
    plan = PropagationPlan.for_gate(cfg.params, cfg.model, cfg.dt)
    adiabatic = phase_trace(cfg.params, cfg.system, plan)
    trajectory = propagate(initial_state(cfg.model), cfg.params, cfg.system, plan)
    dynamic = extract_phase_trace(trajectory)
    header = ["t_us", "phi_gg", "phi_ge", "phi", "phi_gg_state", "phi_ge_state", "phi_state"]
    rows = [
        [t, a, b, c, d, e, f]
        for t, a, b, c, d, e, f in zip(
            adiabatic.times, adiabatic.phi_gg, adiabatic.phi_ge, adiabatic.phi, dynamic.phi_gg, dynamic.phi_ge, dynamic.phi
        )
    ]
    gate, _ = _gate_summary(cfg.params, cfg, plan.n_steps)
    summary = {
        "params": _params_dict(cfg.params),
        "phi_final": float(adiabatic.phi[-1]),
        "phi_final_mod_2pi": float(wrap_phase(adiabatic.phi[-1])),
        "phi_state_final": float(dynamic.phi[-1]),
        "phi_state_final_mod_2pi": float(wrap_phase(dynamic.phi[-1])),
        "phi_difference": float(abs(adiabatic.phi[-1] - dynamic.phi[-1])),
        "max_P_psi_plus": float(trajectory.psi_plus.max()),
        "fidelity": gate["fidelity"],
        "final_norm": gate["final_norm"],
    }
    return ScenarioOutput(summary, {"phase.csv": Table(header, rows), "populations.csv": _populations_table(trajectory, cfg.model)})


def rabi_drive(params: PulseParams, duration: float) -> PulseParams:
    """Constant red drive at ``params.omega0`` for ``duration`` µs, two-photon resonant.

    δ is chosen so that the light-shifted |g⟩ and |r⟩ levels are degenerate,
    leaving only the two-photon coupling.
    """
    e_r, e_b = stark_shifts(params, 0.0)
    tau = params.tau
    return PulseParams(
        params.omega0, params.omegaB, params.delta_big, e_b - e_r, Shape.FLATTOP, tau, duration + 2 * tau
    )


def run_rabi_scan(cfg: ScenarioConfig) -> ScenarioOutput:
    """Plateau Rabi oscillations from |gg⟩ (to |Ψ+⟩) and from |ge⟩ (to |re⟩)."""
    drive = rabi_drive(cfg.params, cfg.rabi_duration)
    half = cfg.rabi_duration / 2
    plan = PropagationPlan(cfg.dt, -half, half, cfg.model)
    from_gg = propagate(QuantumState.from_labels({"gg": 1.0}, cfg.model), drive, cfg.system, plan)
    from_ge = propagate(QuantumState.from_labels({"ge": 1.0}, cfg.model), drive, cfg.system, plan)
    f_pair = rabi_frequency(from_gg, "psi+")
    f_single = rabi_frequency(from_ge, "re")
    omega_eff = float(effective_rabi(drive, 0.0))
    header = ["t_us", "P_gg", "P_psi_plus", "P_psi_minus", "P_rr", "P_ge", "P_re", "norm_gg_start", "norm_ge_start"]
    rows = [
        [t, a, b, c, d, e, f, g, h]
        for t, a, b, c, d, e, f, g, h in zip(
            from_gg.times,
            from_gg.population("gg"),
            from_gg.psi_plus,
            from_gg.psi_minus,
            from_gg.population("rr"),
            from_ge.population("ge"),
            from_ge.population("re"),
            from_gg.norms,
            from_ge.norms,
        )
    ]
    summary = {
        "drive": _params_dict(drive),
        "effective_rabi": omega_eff,
        "frequency_gg_psi_plus": f_pair,
        "frequency_ge_re": f_single,
        "ratio": f_pair / f_single,
        "sqrt2": math.sqrt(2.0),
        "ratio_relative_error": abs(f_pair / f_single / math.sqrt(2.0) - 1.0),
    }
    return ScenarioOutput(summary, {"populations.csv": Table(header, rows)})


def run_motional_map(cfg: ScenarioConfig) -> ScenarioOutput:
    plan = PropagationPlan.for_gate(cfg.params, cfg.model, cfg.dt)
    grid, fids = fidelity_map(cfg.params, cfg.system, plan, cfg.grid)
    rows = [[grid[i], grid[j], fids[i, j], 1.0 - fids[i, j]] for i in range(grid.size) for j in range(grid.size)]
    worst = np.unravel_index(np.argmin(fids), fids.shape)
    summary = {
        "params": _params_dict(cfg.params),
        "grid_points": int(cfg.grid),
        "baseline_fidelity": float(fids[0, 0]),
        "baseline_infidelity": float(1.0 - fids[0, 0]),
        "min_fidelity": float(fids.min()),
        "max_infidelity": float(1.0 - fids.min()),
        "worst_theta1": float(grid[worst[0]]),
        "worst_theta2": float(grid[worst[1]]),
        "symmetry_error": float(np.abs(fids - fids.T).max()),
    }
    return ScenarioOutput(summary, {"motional_map.csv": Table(["theta1", "theta2", "fidelity", "infidelity"], rows)})


def run_temperature_sweep(cfg: ScenarioConfig) -> ScenarioOutput:
    plan = PropagationPlan.for_gate(cfg.params, cfg.model, cfg.dt)
    result = temperature_sweep(cfg.params, cfg.system, plan, cfg.temperatures, cfg.samples, cfg.seed)
    rows = [
        [t, phase_scale(t), m, e, n]
        for t, m, e, n in zip(result.temperatures, result.mean_fidelities, result.stderrs, result.sample_counts)
    ]
    summary = {
        "params": _params_dict(cfg.params),
        "temperatures_uK": list(result.temperatures),
        "mean_fidelities": list(result.mean_fidelities),
        "stderrs": list(result.stderrs),
        "samples_per_point": int(cfg.samples),
        "fit_slope_per_uK": result.fit_slope,
        "fit_intercept": result.fit_intercept,
        "rng": "Philox4x64, key (seed, sample index)",
        "rng_seed": result.rng_seed,
    }
    header = ["temperature_uK", "sigma_rad", "mean_fidelity", "stderr", "samples"]
    return ScenarioOutput(summary, {"temperature_sweep.csv": Table(header, rows)})


def run_convergence(cfg: ScenarioConfig) -> ScenarioOutput:
    """Step-size study of the eigen-stepper, checked against RK4 at a fine step."""
    dts = sorted(cfg.dts, reverse=True)
    psi0 = initial_state(cfg.model)
    finals = []
    for dt in dts:
        plan = PropagationPlan.for_gate(cfg.params, cfg.model, dt, record_stride=10**9)
        finals.append(propagate(psi0, cfg.params, cfg.system, plan).final_state.amplitudes)
    reference = finals[-1]
    rk_plan = PropagationPlan.for_gate(cfg.params, cfg.model, cfg.rk_dt, record_stride=10**9)
    rk_final = propagate_rk(psi0, cfg.params, cfg.system, rk_plan).final_state.amplitudes

    rows, changes = [], []
    for k, (dt, psi) in enumerate(zip(dts, finals)):
        change = float(np.linalg.norm(psi - finals[k - 1])) if k else math.nan
        changes.append(change)
        rows.append(["eigen", dt, float(np.linalg.norm(psi - reference)), change, float(np.linalg.norm(psi - rk_final))])
    rows.append(["rk4", cfg.rk_dt, float(np.linalg.norm(rk_final - reference)), math.nan, 0.0])
    orders = [
        math.log(changes[k - 1] / changes[k]) / math.log(dts[k - 2] / dts[k - 1])
        for k in range(2, len(dts))
        if changes[k] > 0 and changes[k - 1] > 0
    ]
    summary = {
        "params": _params_dict(cfg.params),
        "dts": dts,
        "successive_changes": changes[1:],
        "observed_orders": orders,
        "rk4_dt": cfg.rk_dt,
        "eigen_vs_rk4_finest": float(np.linalg.norm(finals[-1] - rk_final)),
    }
    header = ["method", "dt", "deviation_from_finest_eigen", "change_from_previous_dt", "deviation_from_rk4"]
    return ScenarioOutput(summary, {"convergence.csv": Table(header, rows)})


RUNNERS = {
    "table1": run_optimisation,
    "table2": run_optimisation,
    "phase-trace": run_phase_trace,
    "rabi-scan": run_rabi_scan,
    "motional-map": run_motional_map,
    "temperature-sweep": run_temperature_sweep,
    "convergence": run_convergence,
}


def run(cfg: ScenarioConfig) -> tuple[ScenarioOutput, float]:
    start = time.perf_counter()
    out = RUNNERS[cfg.scenario](cfg)
    return out, time.perf_counter() - start
