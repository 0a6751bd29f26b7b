"""Command-line entry point for the simulation sweep harness."""
from __future__ import annotations

import argparse
import sys

from . import experiment, simulate, solver
from .errors import AwtrError, ConfigurationError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARTIAL = 3


def parse_scenario(text: str) -> simulate.CorrelationScenario:
    try:
        kind, _, value = text.partition(":")
        if kind == "serial":
            return simulate.CorrelationScenario(kind="serial", rho=float(value or 0.0))
        if kind == "block":
            return simulate.CorrelationScenario(kind="block", phi=float(value or 1.0))
    except ValueError:
        pass
    raise ConfigurationError(f"cannot parse scenario {text!r}; use serial:RHO or block:PHI")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="awtr",
        description="Top-N organ matching simulation sweeps and plot data export.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a seeded sweep and write CSV outputs")
    run.add_argument("--m", type=int, help="number of organs (rows)")
    run.add_argument("--n", type=int, help="number of patients (columns)")
    run.add_argument("--sparsity", type=float, nargs="+",
                     help="sparsity levels, e.g. 0.9 0.95")
    run.add_argument("--N", type=int, nargs="+", help="top-N list sizes")
    run.add_argument("--methods", nargs="+",
                     choices=experiment.ALLOWED_METHODS, help="methods to fit")
    run.add_argument("--scenario", nargs="+", default=None,
                     help="correlation scenarios, serial:RHO or block:PHI")
    run.add_argument("--reps", type=int, help="replications per cell")
    run.add_argument("--seed", type=int, help="base seed")
    run.add_argument("--cv", action="store_true",
                     help="tune penalties by 5-fold cross-validation per fit")
    run.add_argument("--preset", choices=sorted(experiment.PRESETS),
                     help="size preset: paper, desk or smoke")
    run.add_argument("--trace", action="store_true",
                     help="write per-iteration solver traces")
    run.add_argument("--eval-exclude-observed", action="store_true",
                     help="rank only entries unobserved during training")
    run.add_argument("--out", default="results", help="output directory")
    run.add_argument("--allow-custom", action="store_true",
                     help="accept sparsity/N values outside the standard sets")
    run.add_argument("--config", help="INI config file; CLI flags override it")

    plots = sub.add_parser("plots", help="emit plot-ready CSVs from a results dir")
    plots.add_argument("results_dir")
    return parser


def _config_from_args(args: argparse.Namespace) -> experiment.ExperimentConfig:
    values: dict = {}
    solver_values: dict = {}
    simulator_constants: dict = {}

    if args.config:
        sections = experiment.load_config_file(args.config)
        exp = sections["experiment"]
        for key in ("m", "n", "replications", "base_seed"):
            if key in exp:
                values[key] = int(exp[key])
        if "sparsity_levels" in exp:
            values["sparsity_levels"] = tuple(
                float(s) for s in exp["sparsity_levels"].split(","))
        if "n_values" in exp:
            values["N_values"] = tuple(int(s) for s in exp["n_values"].split(","))
        if "methods" in exp:
            values["methods"] = tuple(exp["methods"].split(","))
        if "scenarios" in exp:
            values["scenarios"] = tuple(
                parse_scenario(s) for s in exp["scenarios"].split(";"))
        for key in ("cv", "eval_exclude_observed", "trace", "allow_custom"):
            if key in exp:
                values[key] = exp[key].lower() in ("1", "true", "yes")
        if "output_dir" in exp:
            values["output_dir"] = exp["output_dir"]
        sol = sections["solver"]
        for key in ("lambda1", "lambda2", "mu1", "mu2", "tol", "weight_floor"):
            if key in sol:
                solver_values[key] = float(sol[key])
        if "max_iterations" in sol:
            solver_values["max_iterations"] = int(sol["max_iterations"])
        if "init_mode" in sol:
            solver_values["init_mode"] = sol["init_mode"]
        simulator_constants = {k: float(v) for k, v in sections["simulator"].items()}

    if args.preset:
        values.update(experiment.PRESETS[args.preset])
    if args.m is not None:
        values["m"] = args.m
    if args.n is not None:
        values["n"] = args.n
    if args.sparsity is not None:
        values["sparsity_levels"] = tuple(args.sparsity)
    if args.N is not None:
        values["N_values"] = tuple(args.N)
    if args.methods is not None:
        values["methods"] = tuple(args.methods)
    if args.scenario is not None:
        values["scenarios"] = tuple(parse_scenario(s) for s in args.scenario)
    if args.reps is not None:
        values["replications"] = args.reps
    if args.seed is not None:
        values["base_seed"] = args.seed
    if args.cv:
        values["cv"] = True
    if args.trace:
        values["trace"] = True
    if args.eval_exclude_observed:
        values["eval_exclude_observed"] = True
    if args.allow_custom:
        values["allow_custom"] = True
    values["output_dir"] = args.out
    values["solver_config"] = solver.SolverConfig(**solver_values)
    values["simulator_constants"] = simulator_constants
    return experiment.ExperimentConfig(**values)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "plots":
            for path in experiment.emit_plots(args.results_dir):
                print(path)
            return EXIT_OK
        config = _config_from_args(args)
        config.validate()
    except (ConfigurationError, AwtrError, FileNotFoundError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = experiment.run_experiment(config)
    print(out / "results.csv")
    import csv
    with open(out / "results.csv", newline="") as fh:
        partial = any(row["status"] != "ok" for row in csv.DictReader(fh))
    return EXIT_PARTIAL if partial else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
