"""Command-line entry point: run experiments, validate bounds, emit CSVs.

One JSON config file describes a problem, one or more estimators to sweep
over it, the optimizer settings, and the trial panel. Every method in a
sweep shares the problem seed panel, so comparisons are paired. Floats are
serialized with shortest round-trip repr.

Subcommands: ``run``, ``validate``, ``diagnose-symmetry``, ``sweep``.
Exit codes: 0 ok, 1 config error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .diagnostics import symmetry_diagnostic, validate_bounds
from .errors import ConfigError, LazoError
from .estimators import EstimatorConfig
from .numerics import Ball, Box, FeasibleSet, Stream, Unconstrained, rng_stream
from .optimizer import RunConfig, Trajectory, run, theorem1_step_sizes

TRAJECTORY_COLUMNS = (
    "trial", "t", "loss", "cum_queries", "queries_this_round",
    "rule_fired", "variation", "est_sq_norm",
)
AGGREGATE_COLUMNS = ("t", "loss_mean", "loss_std", "queries_mean", "cum_queries_mean")


@dataclass
class ExperimentSpec:
    """One parsed config file: a method sweep over a shared problem panel."""

    configs: list  # [(name, RunConfig)]
    trials: int
    diagnostics: dict
    sweep: dict


def _fmt(value) -> str:
    """Shortest round-trip serialization for CSV cells."""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_feasible_set(obj) -> FeasibleSet:
    if obj is None:
        return Unconstrained()
    kind = obj.get("kind", "unconstrained")
    if kind == "unconstrained":
        return Unconstrained()
    if kind == "ball":
        return Ball(radius=float(obj["radius"]))
    if kind == "box":
        return Box(lower=np.asarray(obj["lower"], dtype=float),
                   upper=np.asarray(obj["upper"], dtype=float))
    raise ConfigError(f"unknown feasible set kind {kind!r}")


def _parse_estimator(obj, delta_default=None) -> EstimatorConfig:
    def num(key, default):
        v = obj.get(key, default)
        return math.inf if v in ("inf", None) else float(v)

    delta = obj.get("delta", delta_default)
    if delta is None:
        raise ConfigError("estimator needs a delta (or an optimizer preset)")
    return EstimatorConfig(
        variant=obj["variant"],
        delta=float(delta),
        threshold=num("threshold", math.inf),
        lipschitz_scale=num("lipschitz_scale", math.inf),
        history_len=int(obj.get("history_len", 1)),
        directions_per_round=int(obj.get("directions_per_round", 1)),
    )


def parse_config(path: Path, seed_override=None) -> ExperimentSpec:
    """Load and validate one experiment config file."""
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from None
    for section in ("problem", "optimizer"):
        if section not in raw:
            raise ConfigError(f"config is missing the {section!r} section")
    if "estimator" not in raw and "estimators" not in raw:
        raise ConfigError("config needs an 'estimator' or 'estimators' section")
    problem = raw["problem"]
    opt = raw["optimizer"]
    seed = int(raw.get("seed", 0)) if seed_override is None else int(seed_override)
    trials = int(raw.get("trials", 10))
    horizon = int(opt["horizon"])
    fset = parse_feasible_set(opt.get("feasible_set"))
    eta = opt.get("eta")
    delta_default = None
    lipschitz = opt.get("lipschitz")
    preset = opt.get("preset")
    if preset is not None:
        dim = int(preset["dimension"])
        eta, delta_default = theorem1_step_sizes(
            float(preset["radius"]), float(preset["lipschitz"]), dim, horizon)
        lipschitz = float(preset["lipschitz"])
    if eta is None:
        raise ConfigError("optimizer needs 'eta' (or a preset)")
    est_objs = raw.get("estimators") or [raw["estimator"]]
    configs = []
    names = set()
    for obj in est_objs:
        est = _parse_estimator(obj, delta_default)
        name = obj.get("name", est.variant)
        if name in names:
            raise ConfigError(f"duplicate estimator name {name!r}")
        names.add(name)
        configs.append((name, RunConfig(
            problem=problem["id"],
            problem_params=problem.get("params", {}),
            estimator=est,
            horizon=horizon,
            eta=float(eta),
            feasible_set=fset,
            seed=seed,
            trials=trials,
            x0=opt.get("x0", "zeros"),
            lipschitz=None if lipschitz is None else float(lipschitz),
        )))
    return ExperimentSpec(
        configs=configs,
        trials=trials,
        diagnostics=raw.get("diagnostics", {}),
        sweep=raw.get("sweep", {}),
    )


# ---------------------------------------------------------------------------
# CSV emission
# ---------------------------------------------------------------------------

def write_trajectory_csv(path: Path, traj: Trajectory) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_COLUMNS)
        for t in range(len(traj)):
            writer.writerow([
                traj.trial, t, _fmt(float(traj.loss[t])),
                int(traj.cum_queries[t]), int(traj.queries[t]),
                str(traj.rule[t]), _fmt(float(traj.variation[t])),
                _fmt(float(traj.est_sq_norm[t])),
            ])


def read_trajectory_csv(path: Path) -> dict:
    """Parse an emitted trajectory CSV back into column arrays."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != TRAJECTORY_COLUMNS:
            raise ConfigError(f"unexpected trajectory header {header!r}")
        rows = list(reader)
    return {
        "trial": np.array([int(r[0]) for r in rows]),
        "t": np.array([int(r[1]) for r in rows]),
        "loss": np.array([float(r[2]) for r in rows]),
        "cum_queries": np.array([int(r[3]) for r in rows]),
        "queries_this_round": np.array([int(r[4]) for r in rows]),
        "rule_fired": np.array([r[5] for r in rows]),
        "variation": np.array([float(r[6]) for r in rows]),
        "est_sq_norm": np.array([float(r[7]) for r in rows]),
    }


def write_aggregate_csv(path: Path, trajectories: list) -> None:
    loss = np.stack([t.loss for t in trajectories])
    queries = np.stack([t.queries for t in trajectories])
    cum = np.stack([t.cum_queries for t in trajectories])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(AGGREGATE_COLUMNS)
        for t in range(loss.shape[1]):
            writer.writerow([
                t, _fmt(float(loss[:, t].mean())), _fmt(float(loss[:, t].std())),
                _fmt(float(queries[:, t].mean())), _fmt(float(cum[:, t].mean())),
            ])


def write_summary_csv(path: Path, trajectories: list) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial", "final_loss", "total_queries", "loss_checksum"])
        for traj in trajectories:
            writer.writerow([
                traj.trial, _fmt(float(traj.loss[-1])),
                int(traj.cum_queries[-1]), traj.loss_checksum,
            ])


# ---------------------------------------------------------------------------
# trial orchestration
# ---------------------------------------------------------------------------

def _run_one(args) -> Trajectory:
    config, trial = args
    return run(config, trial)


def run_trials(config: RunConfig, trials: int, jobs: int = 1) -> list:
    """Run the trial panel for one config, optionally on a process pool."""
    tasks = [(config, trial) for trial in range(trials)]
    if jobs <= 1 or trials == 1:
        return [_run_one(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_one, tasks))


def _cmd_run(spec: ExperimentSpec, out: Path, jobs: int) -> int:
    for name, config in spec.configs:
        cfg_dir = out / name
        cfg_dir.mkdir(parents=True, exist_ok=True)
        trajectories = run_trials(config, spec.trials, jobs)
        for traj in trajectories:
            write_trajectory_csv(cfg_dir / f"trajectory_trial{traj.trial}.csv", traj)
        write_aggregate_csv(cfg_dir / "aggregate.csv", trajectories)
        write_summary_csv(cfg_dir / "trials_summary.csv", trajectories)
        print(f"{name}: {spec.trials} trials -> {cfg_dir}")
    return 0


def _cmd_validate(spec: ExperimentSpec, out: Path, jobs: int) -> int:
    out.mkdir(parents=True, exist_ok=True)
    worst = 0
    for name, config in spec.configs:
        trajectories = run_trials(config, spec.trials, jobs)
        path = out / f"bound_report_{name}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([
                "trial", "rounds_checked", "eq8_violations",
                "lemma2_premise_rounds", "lemma2_violations",
            ])
            for traj in trajectories:
                report = validate_bounds(traj)
                worst = max(worst, report.eq8_violations, report.lemma2_violations)
                writer.writerow([
                    traj.trial, report.rounds_checked, report.eq8_violations,
                    report.lemma2_premise_rounds, report.lemma2_violations,
                ])
        print(f"{name}: bound report -> {path}")
    if worst:
        print(f"bound violations detected: {worst}", file=sys.stderr)
        return 2
    return 0


def _cmd_diagnose_symmetry(spec: ExperimentSpec, out: Path, jobs: int) -> int:
    out.mkdir(parents=True, exist_ok=True)
    diag = spec.diagnostics
    rounds = diag.get("rounds", [10])
    samples = int(diag.get("samples", 40000))
    n_proj = int(diag.get("projections", 4))
    proj_dim = int(diag.get("projection_dim", 2))
    summary_path = out / "symmetry_summary.csv"
    with open(summary_path, "w", newline="") as fh:
        summary = csv.writer(fh)
        summary.writerow(["config", "round", "n_samples", "member_fraction",
                          "asymmetry_score"])
        for name, config in spec.configs:
            for r in rounds:
                traj = run(config, trial=0, capture_round=int(r))
                report = symmetry_diagnostic(
                    traj.snapshot, n_samples=samples, n_projections=n_proj,
                    projection_dim=proj_dim,
                    rng=rng_stream(config.seed, 0, Stream.DIAGNOSTICS, int(r)),
                )
                member_path = out / f"symmetry_{name}_round{r}.csv"
                axis_names = ("x", "y", "z")
                with open(member_path, "w", newline="") as mh:
                    writer = csv.writer(mh)
                    header = []
                    for m in range(n_proj):
                        header += [
                            f"proj{m}_{axis_names[i] if i < 3 else i}"
                            for i in range(proj_dim)
                        ]
                    writer.writerow(header + ["member"])
                    for i in range(report.n_samples):
                        row = []
                        for P in report.projected:
                            row += [_fmt(float(v)) for v in P[i]]
                        writer.writerow(row + [int(report.member[i])])
                summary.writerow([
                    name, r, report.n_samples,
                    _fmt(report.member_fraction), _fmt(report.asymmetry_score),
                ])
                print(f"{name} round {r}: asymmetry score "
                      f"{report.asymmetry_score:.6f} -> {member_path}")
    return 0


def _cmd_sweep(spec: ExperimentSpec, out: Path, jobs: int) -> int:
    out.mkdir(parents=True, exist_ok=True)
    grid = spec.sweep
    if not grid:
        raise ConfigError("config has no 'sweep' section")
    keys = sorted(grid)
    allowed = {"threshold", "eta", "delta", "lipschitz_scale"}
    bad = set(keys) - allowed
    if bad:
        raise ConfigError(f"sweep supports {sorted(allowed)}, got {sorted(bad)}")
    path = out / "sweep.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["config"] + keys + ["final_loss_mean", "total_queries_mean"])
        for name, base in spec.configs:
            for values in itertools.product(*(grid[k] for k in keys)):
                point = dict(zip(keys, [math.inf if v == "inf" else float(v)
                                        for v in values]))
                est = base.estimator
                est_kwargs = {k: point[k] for k in point if k != "eta"}
                config = replace(
                    base,
                    estimator=replace(est, **est_kwargs),
                    eta=point.get("eta", base.eta),
                )
                trajectories = run_trials(config, spec.trials, jobs)
                final_loss = float(np.mean([t.loss[-1] for t in trajectories]))
                total_q = float(np.mean([t.cum_queries[-1] for t in trajectories]))
                writer.writerow([name] + [_fmt(point[k]) for k in keys]
                                + [_fmt(final_loss), _fmt(total_q)])
    print(f"sweep -> {path}")
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lazo",
        description="Lazy-query zeroth-order optimization benchmarks",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd, help_text in (
        ("run", "run the trial panel and write trajectory/aggregate CSVs"),
        ("validate", "run and check the per-round estimate-norm bounds"),
        ("diagnose-symmetry", "census the reuse region's antipodal symmetry"),
        ("sweep", "grid-search threshold/eta/delta and summarize"),
    ):
        p = sub.add_parser(cmd, help=help_text)
        p.add_argument("--config", required=True, type=Path,
                       help="experiment config JSON")
        p.add_argument("--out", type=Path, default=Path("results"),
                       help="output directory (default: ./results)")
        p.add_argument("--jobs", type=int, default=1,
                       help="worker processes for the trial panel")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
    return parser


_COMMANDS = {
    "run": _cmd_run,
    "validate": _cmd_validate,
    "diagnose-symmetry": _cmd_diagnose_symmetry,
    "sweep": _cmd_sweep,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = parse_config(args.config, seed_override=args.seed)
        return _COMMANDS[args.command](spec, args.out, args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except LazoError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
