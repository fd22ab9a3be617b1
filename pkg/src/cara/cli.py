"""Command-line front end: region export, simulation sweeps, comparisons.

    cara --config experiment.json [--task compare] [--out result.csv]

Exit status is 0 on success, 2 when parameters fail validation and 1 on any
other failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Any, Callable, Iterable, Sequence

from . import analysis as A
from .config import ConfigError, ExperimentConfig, Task, dump_config, load_config
from .model import ArrivalRates, ParameterError, SystemParams, TransmitProbs
from .sim import (
    ChannelProcessSpec,
    Policy,
    PolicyKind,
    SimConfig,
    Verdict,
    run,
    run_coupled_dominance,
)

BOUNDARY_COLUMNS = ["segment_tag", "lambda1", "lambda2", "region_label"]


@dataclass
class TaskResult:
    columns: list[str]
    rows: list[dict[str, Any]]
    summary: list[str]


# -- region export -------------------------------------------------------------


def _boundary_rows(label: str, vertices: Iterable[A.BoundaryVertex]) -> list[dict[str, Any]]:
    return [
        {"segment_tag": v.tag, "lambda1": v.lambda1, "lambda2": v.lambda2, "region_label": label}
        for v in vertices
    ]


def region_rows(cfg: ExperimentConfig, which: Sequence[str]) -> TaskResult:
    params = _system(cfg)
    samples = cfg.output.boundary_samples
    rows: list[dict[str, Any]] = []
    summary = []
    if "cara_eps" in which:
        b = A.closure_boundary(params)
        rows += _boundary_rows("cara_eps", b.vertices(samples))
        summary.append(f"cara_eps: shape={b.shape.value} PX={_pt(b.px)} PY={_pt(b.py)} "
                       + (f"P1={_pt(b.p1)} P2={_pt(b.p2)}" if b.three_segment else f"P3={_pt(b.p3)}"))
    if "cara_perfect" in which:
        b = A.closure_boundary(params.perfect_csi())
        rows += _boundary_rows("cara_perfect", b.vertices(samples))
        summary.append(f"cara_perfect: shape={b.shape.value}")
    if "aloha" in which:
        try:
            b = A.aloha_boundary(params)
        except A.AlohaAssumptionError as exc:
            summary.append(f"aloha: skipped ({exc})")
        else:
            rows += _boundary_rows("aloha", b.vertices(samples))
            summary.append(f"aloha: shape={b.shape.value}")
    if "lcq" in which:
        lcq = cfg.lcq if cfg.lcq is not None else params
        rows += _boundary_rows("lcq", A.lcq_vertices(lcq))
        if cfg.system is not None:
            summary.append(f"lcq: cara_subset_of_lcq={A.cara_subset_of_lcq(params)}")
    return TaskResult(BOUNDARY_COLUMNS, rows, summary)


def _pt(p) -> str:
    return f"({p[0]:.6g}, {p[1]:.6g})"


def _system(cfg: ExperimentConfig) -> SystemParams:
    if cfg.system is None:
        raise ConfigError("this task needs two-node system parameters")
    return cfg.system


# -- simulation tasks ----------------------------------------------------------


def _sim_config(cfg: ExperimentConfig, rates: Sequence[float], seed: int) -> SimConfig:
    s = cfg.sim
    policy = Policy.parse(s.policy)
    params = cfg.lcq_params() if policy.kind is PolicyKind.LCQ and cfg.lcq is not None else _system(cfg)
    return SimConfig(
        params=params,
        policy=policy,
        rates=tuple(rates),
        p=TransmitProbs(*s.p),
        channel=ChannelProcessSpec(s.channel_mode, s.persistence),
        horizon=s.horizon,
        seed=seed,
        warmup=s.warmup,
        queue_cap=s.queue_cap,
    )


def _stats_row(stats) -> dict[str, Any]:
    row: dict[str, Any] = {"verdict": stats.verdict.value, "slots_run": stats.slots_run}
    for i, n in enumerate(stats.nodes, start=1):
        row[f"service_rate{i}"] = n.service_rate
        row[f"departure_rate{i}"] = n.departure_rate
        row[f"empty_fraction{i}"] = n.empty_fraction
        row[f"mean_queue{i}"] = n.mean_queue
        row[f"queue_slope{i}"] = n.queue_slope
        row[f"verdict{i}"] = n.verdict.value
    return row


def _stat_columns(n: int) -> list[str]:
    cols = ["verdict", "slots_run"]
    for i in range(1, n + 1):
        cols += [f"service_rate{i}", f"departure_rate{i}", f"empty_fraction{i}",
                 f"mean_queue{i}", f"queue_slope{i}", f"verdict{i}"]
    return cols


def _run_point(job: tuple[SimConfig]) -> dict[str, Any]:
    (sc,) = job
    try:
        return _stats_row(run(sc))
    except Exception as exc:  # recorded per point, never fatal
        return {"verdict": "error", "error": f"{type(exc).__name__}: {exc}"}


def _map(fn: Callable, jobs: list, workers: int) -> list:
    """Ordered map; results come back in job order whatever the completion order."""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def simulate_rows(cfg: ExperimentConfig) -> TaskResult:
    rates = cfg.sim.rates
    if rates is None:
        raise ConfigError("simulate needs sim.rates")
    jobs = [(_sim_config(cfg, rates, seed),) for seed in cfg.sim.seeds]
    n = jobs[0][0].n_nodes
    results = _map(_run_point, jobs, cfg.sim.workers)
    rows = [{"seed": seed, **res} for seed, res in zip(cfg.sim.seeds, results)]
    summary = [f"seed {r['seed']}: {r['verdict']}" for r in rows]
    return TaskResult(["seed"] + _stat_columns(n) + ["error"], rows, summary)


def sweep_rows(cfg: ExperimentConfig) -> TaskResult:
    points = cfg.grid.points()
    jobs = [(_sim_config(cfg, pt, seed),) for pt in points for seed in cfg.sim.seeds]
    results = _map(_run_point, jobs, cfg.sim.workers)
    keys = [(pt, seed) for pt in points for seed in cfg.sim.seeds]
    rows = [{"lambda1": pt[0], "lambda2": pt[1], "seed": seed, **res} for (pt, seed), res in zip(keys, results)]
    return TaskResult(["lambda1", "lambda2", "seed"] + _stat_columns(2) + ["error"], rows,
                      [f"{len(rows)} simulation runs over {len(points)} grid points"])


def membership_fn(cfg: ExperimentConfig) -> Callable[[float, float], bool]:
    how = cfg.sim.membership
    if how == "lcq":
        lcq = cfg.lcq_params()
        return lambda l1, l2: A.lcq_region_contains(lcq, (l1, l2))
    params = _system(cfg)
    if how == "closure":
        b = A.closure_boundary(params)
        return lambda l1, l2: b.contains(ArrivalRates(l1, l2))
    p = TransmitProbs(*cfg.sim.p)
    return lambda l1, l2: A.fixed_p_region_contains(params, p, ArrivalRates(l1, l2))


def in_band(contains: Callable[[float, float], bool], l1: float, l2: float, band: float) -> bool:
    """Whether the point lies within ``band`` (sup-norm) of the frontier.

    The regions are closed under decreasing either rate, so comparing the
    two opposite corners of the surrounding box decides it.
    """
    if band <= 0:
        return False
    lo = contains(max(l1 - band, 0.0), max(l2 - band, 0.0))
    hi = contains(l1 + band, l2 + band)
    return lo != hi


def compare_rows(cfg: ExperimentConfig) -> TaskResult:
    sweep = sweep_rows(cfg)
    contains = membership_fn(cfg)
    agree = counted = 0
    rows = []
    for row in sweep.rows:
        l1, l2 = row["lambda1"], row["lambda2"]
        inside = contains(l1, l2)
        band = in_band(contains, l1, l2, cfg.sim.band)
        ok = None
        if row["verdict"] != "error":
            ok = (row["verdict"] == Verdict.STABLE.value) == inside
            if not band:
                counted += 1
                agree += ok
        rows.append({**row, "analytic_inside": inside, "in_band": band, "agree": ok})
    rate = agree / counted if counted else float("nan")
    summary = [f"{len(rows)} points, {counted} outside the {cfg.sim.band} band, "
               f"agreement {agree}/{counted} = {rate:.4f}"]
    cols = sweep.columns[:3] + ["analytic_inside", "in_band", "agree"] + sweep.columns[3:]
    return TaskResult(cols, rows, summary)


def dominance_rows(cfg: ExperimentConfig) -> TaskResult:
    rates = cfg.sim.rates
    if rates is None:
        raise ConfigError("dominance_check needs sim.rates")
    policy = Policy.parse(cfg.sim.policy)
    node = policy.dominant_node if policy.kind is PolicyKind.CARA_DOMINANT else 2
    rows = []
    for seed in cfg.sim.seeds:
        orig = _sim_config(cfg, rates, seed)
        orig = replace(orig, policy=Policy(PolicyKind.CARA))
        dom = replace(orig, policy=Policy(PolicyKind.CARA_DOMINANT, node),
                      seed=seed + 1 if cfg.sim.decoupled else seed)
        rep = run_coupled_dominance(orig, dom)
        rows.append({
            "seed": seed,
            "holds": rep.holds,
            "identical": rep.identical,
            "slots_checked": rep.slots_checked,
            "violation_slot": rep.first_violation[0] if rep.first_violation else None,
            "violation_node": rep.first_violation[1] if rep.first_violation else None,
        })
    failed = [r for r in rows if not r["holds"]]
    summary = [f"dominance ({'decoupled' if cfg.sim.decoupled else 'coupled'}): "
               f"{len(rows) - len(failed)}/{len(rows)} seeds pass"]
    summary += [f"  seed {r['seed']}: violation at slot {r['violation_slot']} node {r['violation_node']}" for r in failed]
    summary += [f"  seed {r['seed']}: trajectories identical" for r in rows if r["identical"]]
    return TaskResult(["seed", "holds", "identical", "slots_checked", "violation_slot", "violation_node"], rows, summary)


def run_task(cfg: ExperimentConfig) -> TaskResult:
    task = cfg.task
    if task is Task.REGION:
        return region_rows(cfg, ("cara_eps", "cara_perfect", "aloha", "lcq"))
    if task is Task.ALOHA_REGION:
        return region_rows(cfg, ("aloha",))
    if task is Task.LCQ_REGION:
        if cfg.system is None:
            lcq = cfg.lcq_params()
            return TaskResult(BOUNDARY_COLUMNS, _boundary_rows("lcq", A.lcq_vertices(lcq)), ["lcq"])
        return region_rows(cfg, ("lcq",))
    if task is Task.SIMULATE:
        return simulate_rows(cfg)
    if task is Task.SWEEP:
        return sweep_rows(cfg)
    if task is Task.COMPARE:
        return compare_rows(cfg)
    if task is Task.DOMINANCE_CHECK:
        return dominance_rows(cfg)
    raise ConfigError(f"unhandled task {task}")


# -- output --------------------------------------------------------------------


def render(result: TaskResult, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(result.rows, indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=result.columns, extrasaction="ignore", lineterminator="\r\n")
    writer.writeheader()
    for row in result.rows:
        writer.writerow({k: ("" if v is None else v) for k, v in row.items()})
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cara", description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True, help="JSON experiment config")
    ap.add_argument("--task", choices=[t.value for t in Task], help="override the config's task")
    ap.add_argument("--seed", type=int, help="run a single seed instead of sim.seeds")
    ap.add_argument("--workers", type=int, help="parallel simulation processes")
    ap.add_argument("--out", help="output file (default: stdout)")
    ap.add_argument("--format", choices=["csv", "json"])
    ap.add_argument("--boundary-samples", type=int, help="points per curve segment (default 512)")
    ap.add_argument("--band", type=float, help="boundary band excluded from agreement (default 0.02)")
    ap.add_argument("--write-config", metavar="PATH", help="write the effective config and continue")
    ap.add_argument("--decoupled", action="store_true", help="dominance check with mismatched seeds (negative control)")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config).with_overrides(
            task=Task(args.task) if args.task else None,
            seeds=(args.seed,) if args.seed is not None else None,
            workers=args.workers,
            band=args.band,
            decoupled=True if args.decoupled else None,
            path=args.out,
            format=args.format,
            boundary_samples=args.boundary_samples,
        )
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report = cfg.validation()
    if not report.ok:
        print("invalid parameters:", file=sys.stderr)
        for v in report.violations:
            print(f"  {v.field}: {v.message}", file=sys.stderr)
        return 2
    if args.write_config:
        dump_config(cfg, args.write_config)
    try:
        result = run_task(cfg)
    except (ConfigError, ParameterError, A.AlohaAssumptionError, A.LcqSizeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"internal failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    text = render(result, cfg.output.format)
    if cfg.output.path:
        with open(cfg.output.path, "w", newline="") as fh:
            fh.write(text)
        for line in result.summary:
            print(line)
        print(f"wrote {len(result.rows)} rows to {cfg.output.path}")
    else:
        sys.stdout.write(text)
        for line in result.summary:
            print(line, file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
