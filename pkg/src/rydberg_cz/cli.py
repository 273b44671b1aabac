"""Command-line entry point.

Exit status: 0 success, 2 configuration error, 3 physics-precondition
error, 4 optimiser stopped without converging (outputs are still written).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .analysis import DressedStateSingularity, FlatSignalError, PhaseReferenceError
from .config import SCENARIOS, ConfigError, ScenarioConfig, load_config, validate
from .core import InvalidParameterError
from .motional import DegenerateFitError
from .propagator import NormGrowthError
from .scenarios import ScenarioOutput, Table, run

EXIT_CONFIG = 2
EXIT_PHYSICS = 3

PHYSICS_ERRORS = (
    InvalidParameterError,
    NormGrowthError,
    DressedStateSingularity,
    PhaseReferenceError,
    FlatSignalError,
    DegenerateFitError,
)

log = logging.getLogger("rydberg_cz")


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value) + 0.0, ".12g")
    return str(value)


def write_csv(path: Path, table: Table) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(table.header)
        for row in table.rows:
            writer.writerow([_fmt(v) for v in row])


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if np.isfinite(value) else None
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def provenance(cfg: ScenarioConfig) -> dict:
    """Everything needed to re-run a scenario: resolved inputs, seed and software versions."""
    return {
        "package": "rydberg_cz",
        "version": __version__,
        "inputs": cfg.to_dict(),
        "dt": cfg.dt,
        "seed": cfg.seed,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


def write_outputs(cfg: ScenarioConfig, out: ScenarioOutput, runtime: float) -> list[Path]:
    directory = Path(cfg.output_dir)
    directory.mkdir(parents=True, exist_ok=True)
    prov = provenance(cfg)
    written = []
    summary = dict(scenario=cfg.scenario, **out.summary, runtime_s=runtime, provenance=prov)
    summary["files"] = sorted(list(out.tables) + list(out.jsonl) + ["provenance.json"])
    path = directory / "summary.json"
    path.write_text(json.dumps(_jsonable(summary), indent=2) + "\n")
    written.append(path)
    path = directory / "provenance.json"
    path.write_text(json.dumps(_jsonable(prov), indent=2) + "\n")
    written.append(path)
    for name, table in out.tables.items():
        write_csv(directory / name, table)
        written.append(directory / name)
    for name, text in out.jsonl.items():
        (directory / name).write_text(text)
        written.append(directory / name)
    return written


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rydberg-cz",
        description="Simulate and optimise a two-atom Rydberg-blockade CZ gate.",
    )
    parser.add_argument("--scenario", choices=SCENARIOS, help="scenario to run (overrides the config file)")
    parser.add_argument("--config", type=Path, help="JSON config file")
    parser.add_argument("--seed", type=int, help="RNG seed (unsigned 64-bit)")
    parser.add_argument("--out", help="output directory (default: out)")
    parser.add_argument("--dt", type=float, help="time step in µs")
    parser.add_argument("--max-iters", type=int, help="optimiser iteration budget")
    parser.add_argument("--samples", type=int, help="Monte-Carlo samples per temperature")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    return parser


def resolve(args: argparse.Namespace) -> ScenarioConfig:
    overrides = {
        "scenario": args.scenario,
        "seed": args.seed,
        "output_dir": args.out,
        "dt": args.dt,
        "max_iters": args.max_iters,
        "samples": args.samples,
    }
    if args.config is not None:
        return load_config(args.config, overrides)
    if args.scenario is None:
        raise ConfigError("give --scenario or --config")
    return validate({}, overrides)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    log.info("running %s", cfg.scenario)
    try:
        out, runtime = run(cfg)
    except PHYSICS_ERRORS as exc:
        print(f"physics error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PHYSICS

    for path in write_outputs(cfg, out, runtime):
        log.info("wrote %s", path)
    headline = {k: out.summary[k] for k in ("fidelity", "infidelity", "final_norm", "phi") if k in out.summary}
    print(json.dumps(_jsonable({"scenario": cfg.scenario, **headline, "output_dir": cfg.output_dir})))
    if out.status:
        print(f"optimiser did not converge ({out.summary.get('optimiser_status')})", file=sys.stderr)
    return out.status


if __name__ == "__main__":
    sys.exit(main())
