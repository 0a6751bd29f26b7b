"""Seeded sweep harness: sparsity x N x scenario x method with replications.

Outputs under the chosen directory:
  results.csv      one row per (cell, replication, method, N), deterministic
  timings.csv      wall-clock per fit (excluded from the determinism contract)
  summary_hr.csv / summary_ndcg.csv   method x N rows, sparsity columns
  manifest.txt     resolved config, per-cell seeds, results content hash
  traces/          optional per-fit iteration traces
"""
from __future__ import annotations

import configparser
import csv
import hashlib
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import baselines, simulate, solver
from .errors import ConfigurationError
from .matrices import MaskedResponseMatrix
from .metrics import hit_rate, ndcg, nrmse, top_n

ALLOWED_SPARSITY = (0.5, 0.7, 0.9, 0.95, 0.99)
ALLOWED_N = (1, 2, 5, 10)
ALLOWED_METHODS = ("awtr", "prime", "lormc")

PRESETS = {
    "paper": dict(m=200, n=1000, replications=50),
    "desk": dict(m=50, n=250, replications=10),
    "smoke": dict(m=10, n=20, replications=2),
}

RESULT_FIELDS = (
    "method", "m", "n", "sparsity", "N", "scenario_kind", "scenario_param",
    "replication", "hr", "ndcg", "nrmse", "iterations", "seed", "status",
)


@dataclass(frozen=True)
class ExperimentConfig:
    m: int = 50
    n: int = 250
    sparsity_levels: tuple[float, ...] = (0.9,)
    N_values: tuple[int, ...] = (1, 2, 5, 10)
    methods: tuple[str, ...] = ("awtr", "prime", "lormc")
    scenarios: tuple[simulate.CorrelationScenario, ...] = (
        simulate.CorrelationScenario(kind="serial", rho=0.0),
    )
    replications: int = 10
    base_seed: int = 20240901
    cv: bool = False
    output_dir: str = "results"
    eval_exclude_observed: bool = False
    trace: bool = False
    allow_custom: bool = False
    solver_config: solver.SolverConfig = field(default_factory=solver.SolverConfig)
    simulator_constants: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.replications < 1:
            raise ConfigurationError("replications must be >= 1")
        if not self.methods or any(m not in ALLOWED_METHODS for m in self.methods):
            raise ConfigurationError(f"methods must be a subset of {ALLOWED_METHODS}")
        if not self.allow_custom:
            bad_s = [s for s in self.sparsity_levels if s not in ALLOWED_SPARSITY]
            bad_n = [N for N in self.N_values if N not in ALLOWED_N]
            if bad_s or bad_n:
                raise ConfigurationError(
                    f"non-standard sparsity {bad_s} or N {bad_n}; "
                    "pass --allow-custom to accept"
                )
        for s in self.sparsity_levels:
            if not 0.0 <= s < 1.0:
                raise ConfigurationError(f"sparsity {s} outside [0, 1)")
        for N in self.N_values:
            if not 1 <= N <= self.n:
                raise ConfigurationError(f"N={N} outside [1, n={self.n}]")


def derive_seed(base_seed: int, *tokens) -> int:
    """Independent 64-bit stream seed from the base seed and a label path."""
    label = "|".join(str(t) for t in tokens).encode()
    digest = hashlib.blake2b(label, digest_size=8).digest()
    return (base_seed ^ int.from_bytes(digest, "big")) & (2**63 - 1)


def _evaluate(Y_full: np.ndarray, predicted: np.ndarray,
              Y_obs: MaskedResponseMatrix, N: int,
              exclude_observed: bool) -> tuple[float, float, float]:
    truth_scores = Y_full
    pred_scores = predicted
    if exclude_observed:
        neg = -np.inf
        truth_scores = np.where(Y_obs.mask, neg, Y_full)
        pred_scores = np.where(Y_obs.mask, neg, predicted)
    truth = top_n(truth_scores, N)
    pred = top_n(pred_scores, N)
    err = nrmse(Y_full, predicted, ~Y_obs.mask)
    return hit_rate(truth, pred), ndcg(truth, pred), err


def _fit_method(method: str, Y: MaskedResponseMatrix, X, cfg: solver.SolverConfig,
                cv: bool, cv_seed: int, collect_trace: bool):
    if cv:
        cfg = solver.cross_validate(Y, X if method != "lormc" else None,
                                    config=cfg, method=method, seed=cv_seed)
    if method == "awtr":
        return solver.solve(Y, X, cfg, collect_trace=collect_trace)
    if method == "prime":
        return baselines.solve_prime(Y, X, cfg, collect_trace=collect_trace)
    return baselines.solve_lormc(Y, cfg)


def run_experiment(config: ExperimentConfig) -> Path:
    """Execute the full sweep; returns the output directory.

    A solver failure in one cell is recorded as an error row and the run
    continues; determinism of every other row is unaffected.
    """
    config.validate()
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if config.trace:
        (out / "traces").mkdir(exist_ok=True)

    cells = [
        (scenario, sparsity)
        for scenario in config.scenarios
        for sparsity in config.sparsity_levels
    ]
    rows: list[dict] = []
    timing_rows: list[dict] = []
    seed_lines: list[str] = []
    had_failures = False

    for cell_index, (scenario, sparsity) in enumerate(cells):
        for rep in range(config.replications):
            # Seeds depend on the replication only, so every cell sees the
            # same draws: cross-cell comparisons are paired (common random
            # numbers) instead of noise-dominated.
            seed = derive_seed(config.base_seed, rep)
            seed_lines.append(
                f"cell={cell_index} scenario={scenario.kind}:{scenario.param} "
                f"sparsity={sparsity} rep={rep} seed={seed}"
            )
            spec = simulate.CohortSpec(m=config.m, n=config.n, seed=seed)
            donors, patients = simulate.sample_cohort(spec, scenario)
            X = simulate.build_covariates(donors, patients)
            _, Y_full = simulate.synthesize_kas(
                donors, patients, derive_seed(seed, "kas"),
                constants=config.simulator_constants or None,
            )
            Y_obs = simulate.apply_sparsity(Y_full, sparsity, derive_seed(seed, "mask"))
            for method in config.methods:
                t0 = time.perf_counter()
                try:
                    fit = _fit_method(method, Y_obs, X, config.solver_config,
                                      config.cv, derive_seed(seed, "cv"),
                                      config.trace and method != "lormc")
                    status = "ok"
                except Exception:
                    fit = None
                    status = "error"
                    had_failures = True
                wall = time.perf_counter() - t0
                timing_rows.append({
                    "method": method, "sparsity": sparsity,
                    "scenario_kind": scenario.kind,
                    "scenario_param": scenario.param,
                    "replication": rep, "wall_seconds": f"{wall:.3f}",
                })
                if fit is not None and fit.trace:
                    trace_path = (out / "traces" /
                                  f"{method}_cell{cell_index}_rep{rep}.csv")
                    _write_trace(fit.trace, trace_path)
                for N in config.N_values:
                    row = {
                        "method": method, "m": config.m, "n": config.n,
                        "sparsity": sparsity, "N": N,
                        "scenario_kind": scenario.kind,
                        "scenario_param": scenario.param,
                        "replication": rep, "seed": seed, "status": status,
                        "hr": "", "ndcg": "", "nrmse": "", "iterations": "",
                    }
                    if fit is not None:
                        hr, nd, err = _evaluate(Y_full, fit.predicted, Y_obs, N,
                                                config.eval_exclude_observed)
                        row.update(hr=repr(hr), ndcg=repr(nd), nrmse=repr(err),
                                   iterations=fit.iterations_used)
                    rows.append(row)

    _write_csv(out / "results.csv", RESULT_FIELDS, rows)
    _write_csv(out / "timings.csv",
               ("method", "sparsity", "scenario_kind", "scenario_param",
                "replication", "wall_seconds"), timing_rows)
    _write_summaries(rows, out)
    _write_manifest(config, seed_lines, out)
    return out


def _write_csv(path: Path, fields, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(fields))
        writer.writeheader()
        writer.writerows(rows)


def _write_trace(trace: list[dict], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=[
            "iteration", "residual_change", "consensus_R", "consensus_beta",
            "objective",
        ])
        writer.writeheader()
        for row in trace:
            writer.writerow({k: repr(v) if isinstance(v, float) else v
                             for k, v in row.items()})


def _mean_rows(rows: list[dict], metric: str) -> dict[tuple, float]:
    groups: dict[tuple, list[float]] = {}
    for row in rows:
        if row["status"] != "ok":
            continue
        key = (row["method"], row["N"], row["sparsity"])
        groups.setdefault(key, []).append(float(row[metric]))
    return {key: float(np.mean(vals)) for key, vals in groups.items()}


def _write_summaries(rows: list[dict], out: Path) -> None:
    for metric in ("hr", "ndcg"):
        means = _mean_rows(rows, metric)
        methods = sorted({k[0] for k in means})
        Ns = sorted({k[1] for k in means})
        sparsities = sorted({k[2] for k in means})
        with open(out / f"summary_{metric}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method", "N"] + [f"sparsity={s}" for s in sparsities])
            for method in methods:
                for N in Ns:
                    cells = [
                        repr(means[(method, N, s)]) if (method, N, s) in means else ""
                        for s in sparsities
                    ]
                    writer.writerow([method, N] + cells)


def _write_manifest(config: ExperimentConfig, seed_lines: list[str], out: Path) -> None:
    results_hash = hashlib.sha256((out / "results.csv").read_bytes()).hexdigest()
    with open(out / "manifest.txt", "w") as fh:
        fh.write("[experiment]\n")
        fh.write(f"m = {config.m}\nn = {config.n}\n")
        fh.write(f"sparsity_levels = {','.join(map(str, config.sparsity_levels))}\n")
        fh.write(f"N_values = {','.join(map(str, config.N_values))}\n")
        fh.write(f"methods = {','.join(config.methods)}\n")
        scen = ";".join(f"{s.kind}:{s.param}" for s in config.scenarios)
        fh.write(f"scenarios = {scen}\n")
        fh.write(f"replications = {config.replications}\n")
        fh.write(f"base_seed = {config.base_seed}\n")
        fh.write(f"cv = {config.cv}\n")
        fh.write(f"eval_exclude_observed = {config.eval_exclude_observed}\n")
        fh.write("[solver]\n")
        sc = config.solver_config
        for name in ("lambda1", "lambda2", "mu1", "mu2", "tol", "max_iterations",
                     "weight_floor", "init_mode"):
            fh.write(f"{name} = {getattr(sc, name)}\n")
        fh.write("[simulator]\n")
        constants = dict(simulate.DEFAULT_CONSTANTS)
        constants.update(config.simulator_constants)
        for name, value in constants.items():
            fh.write(f"{name} = {value}\n")
        fh.write("[seeds]\n")
        for line in seed_lines:
            fh.write(line + "\n")
        fh.write(f"[hash]\nresults_sha256 = {results_hash}\n")


def emit_plots(results_dir: str | Path) -> list[Path]:
    """Long-format per-figure data: mean and standard error per cell."""
    results_dir = Path(results_dir)
    results_path = results_dir / "results.csv"
    if not results_path.exists():
        raise FileNotFoundError(f"no results.csv in {results_dir}")
    with open(results_path, newline="") as fh:
        rows = [row for row in csv.DictReader(fh)]
    written = []
    for metric in ("hr", "ndcg"):
        by_m: dict[str, dict[tuple, list[float]]] = {}
        for row in rows:
            if row["status"] != "ok":
                continue
            key = (row["method"], row["sparsity"], row["N"])
            by_m.setdefault(row["m"], {}).setdefault(key, []).append(float(row[metric]))
        for m_value in sorted(by_m) or [""]:
            path = results_dir / f"fig_{metric}_m{m_value}.csv"
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["method", "sparsity", "N", "mean", "stderr"])
                for (method, sparsity, N), vals in sorted(by_m.get(m_value, {}).items()):
                    mean = float(np.mean(vals))
                    stderr = (float(np.std(vals, ddof=1) / np.sqrt(len(vals)))
                              if len(vals) > 1 else 0.0)
                    writer.writerow([method, sparsity, N, repr(mean), repr(stderr)])
            written.append(path)
    return written


def load_config_file(path: str | Path) -> dict:
    """Read the [simulator]/[solver]/[experiment] key=value sections."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigurationError(f"cannot read config file {path}")
    out: dict = {"simulator": {}, "solver": {}, "experiment": {}}
    for section in out:
        if parser.has_section(section):
            out[section] = dict(parser.items(section))
    return out
