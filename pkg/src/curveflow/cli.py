"""Command-line entry point: ``curveflow --flow apmcf --out runs/apmcf``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import experiment
from .errors import ConfigError
from .flows import FLUX_RULES

log = logging.getLogger("curveflow")

# flag name -> config field
FLAGS = {
    "flow": "flow",
    "scheme": "scheme",
    "N": "N",
    "tau": "tau",
    "omega_rule": "omega_rule",
    "omega": "omega",
    "sigma": "sigma",
    "rho": "rho",
    "flux": "flux",
    "tol": "tol",
    "t_end": "t_end",
    "dt": "dt",
    "stall": "stall",
    "snapshots": "snapshots",
    "out": "out",
    "svg": "svg",
    "redistribute": "redistribute",
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="curveflow",
        description="Evolve the benchmark curve by MCF, area-preserving MCF or Hele-Shaw flow.",
    )
    p.add_argument("--config", type=Path, help="key = value file; flags override it")
    p.add_argument("--sweep", type=Path, help="one run per line of key=value tokens, run in parallel")
    p.add_argument("--workers", type=int, default=None, help="parallel workers for --sweep")
    p.add_argument("--flow", choices=experiment.FLOWS)
    p.add_argument("--scheme", choices=experiment.SCHEMES)
    p.add_argument("--N", type=int, help="number of vertices")
    p.add_argument("--tau", type=float, help="upper bound of the adaptive time step")
    p.add_argument("--omega-rule", choices=experiment.OMEGA_RULES, help="paper: 10N/dt; constant: --omega")
    p.add_argument("--omega", type=float, help="tangential relaxation rate for --omega-rule constant")
    p.add_argument("--sigma", type=float, help="Hele-Shaw surface tension")
    p.add_argument("--rho", type=float, help="Hele-Shaw source offset in edge lengths")
    p.add_argument("--flux", choices=FLUX_RULES, help="Hele-Shaw edge flux: exact edge mean or midpoint value")
    p.add_argument("--tol", type=float, help="Newton residual tolerance")
    p.add_argument("--t-end", type=float, help="final time")
    p.add_argument("--dt", type=float, help="uniform time step instead of the adaptive rule")
    p.add_argument("--stall", choices=experiment.STALL_POLICIES, help="what to do when Newton stalls")
    p.add_argument("--snapshots", type=float, help="snapshot interval in t")
    p.add_argument("--out", help="output directory")
    p.add_argument("--svg", action="store_const", const=True, help="also write SVG plots")
    p.add_argument(
        "--no-redistribute", dest="redistribute", action="store_const", const=False,
        help="skip uniform redistribution of the initial vertices",
    )
    return p


def configure_logging() -> None:
    level = os.environ.get("CURVEFLOW_LOG", "INFO").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def overrides_from(args: argparse.Namespace) -> dict:
    return {field: getattr(args, flag) for flag, field in FLAGS.items() if getattr(args, flag) is not None}


def _run_one(config: experiment.ExperimentConfig) -> int:
    configure_logging()
    return experiment.run(config).status


def sweep_configs(base: dict, path: Path, config_path: Path | None) -> list[experiment.ExperimentConfig]:
    """Each sweep line overrides the base; outputs go to ``<out>/run_<k>`` unless set."""
    entries = experiment.parse_sweep(path.read_text())
    root = Path(base.get("out", "out"))
    configs = []
    for k, entry in enumerate(entries):
        values = dict(base)
        values.update(entry)
        if "out" not in entry:
            values["out"] = str(root / f"run_{k:03d}")
        configs.append(experiment.load_config(config_path, values))
    outs = [c.out for c in configs]
    if len(set(outs)) != len(outs):
        raise ConfigError("sweep runs must write to distinct output directories")
    return configs


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging()
    base = overrides_from(args)
    try:
        if args.sweep is None:
            config = experiment.load_config(args.config, base)
        else:
            configs = sweep_configs(base, args.sweep, args.config)
    except (ConfigError, OSError, TypeError, ValueError) as exc:
        log.error("config error: %s", exc)
        return experiment.EXIT_CONFIG

    if args.sweep is None:
        return experiment.run(config).status

    with ProcessPoolExecutor(max_workers=args.workers) as pool:
        statuses = list(pool.map(_run_one, configs))
    for config, status in zip(configs, statuses):
        log.info("%s: exit %d", config.out, status)
    return max(statuses, default=experiment.EXIT_OK)


if __name__ == "__main__":
    sys.exit(main())
