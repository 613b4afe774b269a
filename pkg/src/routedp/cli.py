"""Command-line front end: solve, generate, verify and bench subcommands.

Exit codes: 0 success, 1 solver failure or verification mismatch, 2 usage
error.  Reports are CSV (one header line, then rows ordered by instance
id) or a JSON array with --json.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

from . import exact
from .heatmaps import Heatmap, read_heatmap
from .instances import (Instance, ProblemKind, generate_tsp, generate_tsptw,
                        generate_vrp, read_instance, write_instance)
from .policy import Policy
from .solver import SolverConfig, solve

GENERATORS = {
    ProblemKind.TSP: lambda n, seed, mw: generate_tsp(n, seed),
    ProblemKind.VRP: lambda n, seed, mw: generate_vrp(n, seed),
    ProblemKind.TSPTW: lambda n, seed, mw: generate_tsptw(n, seed, mw),
}

REPORT_COLUMNS = ["instance", "cost", "feasible", "beam_size", "policy",
                  "sparsification", "solve_time", "heatmap_time", "error"]


@dataclass
class ReportRow:
    instance: str
    cost: float | None
    feasible: bool
    beam_size: int
    policy: str
    sparsification: str
    solve_time: float
    heatmap_time: float
    error: str | None = None

    def csv(self) -> str:
        cost = "" if self.cost is None else repr(self.cost)
        return ",".join([self.instance, cost, str(int(self.feasible)),
                         str(self.beam_size), self.policy, self.sparsification,
                         f"{self.solve_time:.6f}", f"{self.heatmap_time:.6f}",
                         self.error or ""])


@dataclass
class RunReport:
    rows: list[ReportRow]
    ref_costs: dict[str, float] | None = None

    @property
    def mean_cost(self) -> float | None:
        costs = [r.cost for r in self.rows if r.cost is not None]
        return sum(costs) / len(costs) if costs else None

    @property
    def mean_gap(self) -> float | None:
        if not self.ref_costs:
            return None
        gaps = [(r.cost - self.ref_costs[r.instance]) / self.ref_costs[r.instance]
                for r in self.rows
                if r.cost is not None and r.instance in self.ref_costs]
        return sum(gaps) / len(gaps) if gaps else None

    @property
    def total_time(self) -> float:
        return sum(r.solve_time + r.heatmap_time for r in self.rows)

    def write(self, path: Path, as_json: bool) -> None:
        if as_json:
            path.write_text(json.dumps([asdict(r) for r in self.rows], indent=1),
                            encoding="utf-8")
        else:
            lines = [",".join(REPORT_COLUMNS)] + [r.csv() for r in self.rows]
            path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    def summary(self) -> str:
        parts = [f"instances={len(self.rows)}"]
        if self.mean_cost is not None:
            parts.append(f"mean_cost={self.mean_cost:.6f}")
        if self.mean_gap is not None:
            parts.append(f"mean_gap={self.mean_gap:.6%}")
        parts.append(f"total_time={self.total_time:.2f}s")
        return " ".join(parts)


def _instance_paths(spec: str) -> list[Path]:
    p = Path(spec)
    if p.is_dir():
        return sorted(q for q in p.iterdir() if q.suffix == ".json")
    if p.is_file():
        return [p]
    raise FileNotFoundError(f"no instance file or directory at {spec}")


def _sparsification_label(config: SolverConfig) -> str:
    if config.knn is not None:
        return f"knn={config.knn}"
    return f"threshold={config.threshold:g}"


def _load_ref_costs(path: str | None) -> dict[str, float] | None:
    if path is None:
        return None
    refs = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            name, value = line.split()
            refs[name] = float(value)
    return refs


def _solve_one(args: tuple) -> ReportRow:
    path, heatmap_dir, config, out_dir = args
    instance_id = path.stem
    label = _sparsification_label(config)
    hm_time = 0.0
    try:
        instance = read_instance(path)
        heatmap: Heatmap | None = None
        if heatmap_dir is not None:
            hp = Path(heatmap_dir) / f"{instance_id}.heat"
            t0 = time.perf_counter()
            heatmap = read_heatmap(hp, instance.n)
            hm_time = time.perf_counter() - t0
        t0 = time.perf_counter()
        result = solve(instance, config, heatmap=heatmap)
        solve_time = time.perf_counter() - t0
    except (OSError, ValueError) as exc:
        return ReportRow(instance_id, None, False, config.beam_size,
                         config.policy.value, label, 0.0, hm_time, error=str(exc))
    if not result.found:
        err = None if instance.kind == ProblemKind.TSPTW else \
            f"beam died at step {result.failed_at_step}"
        return ReportRow(instance_id, None, False, config.beam_size,
                         config.policy.value, label, solve_time, hm_time, error=err)
    if out_dir is not None:
        sol = result.solution
        out = {"actions": list(sol.actions), "routes": [list(r) for r in sol.routes],
               "cost": sol.cost}
        (Path(out_dir) / f"{instance_id}.sol.json").write_text(
            json.dumps(out), encoding="utf-8")
    return ReportRow(instance_id, result.solution.cost, True, config.beam_size,
                     config.policy.value, label, solve_time, hm_time)


def _run_solves(paths, heatmap_dir, config, out_dir, jobs: int) -> list[ReportRow]:
    work = [(p, heatmap_dir, config, out_dir) for p in paths]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_solve_one, work))
    else:
        rows = [_solve_one(w) for w in work]
    return sorted(rows, key=lambda r: r.instance)


def _config_from_args(args, beam_size=None, policy=None, threshold=None,
                      knn=None, dominance=None) -> SolverConfig:
    return SolverConfig(
        beam_size=beam_size if beam_size is not None else args.beam_size,
        policy=Policy(policy if policy is not None else args.policy),
        threshold=threshold if knn is None else None,
        knn=knn,
        dominance_enabled=(dominance if dominance is not None
                           else args.dominance == "on"),
        use_score_bound_prefilter=args.score_bound_prefilter == "on",
        invert_cost_heat=getattr(args, "invert_cost_heat", False),
    )


def cmd_solve(args) -> int:
    paths = _instance_paths(args.instances)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
    config = _config_from_args(args, threshold=args.threshold, knn=args.knn)
    rows = _run_solves(paths, args.heatmap_dir, config, args.out, args.jobs)
    report = RunReport(rows, _load_ref_costs(args.ref_costs))
    dest = Path(args.out or ".") / ("report.json" if args.json else "report.csv")
    report.write(dest, args.json)
    print(report.summary())
    return 0 if all(r.error is None for r in rows) else 1


def cmd_generate(args) -> int:
    kind = ProblemKind(args.problem)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        instance = GENERATORS[kind](args.n, args.seed + i, args.max_window)
        write_instance(instance, out / f"{kind.value}{args.n}_{args.seed + i:04d}.json")
    print(f"wrote {args.count} {kind.value} instances to {out}")
    return 0


def cmd_verify(args) -> int:
    kind = ProblemKind(args.problem)
    config = SolverConfig(beam_size=args.beam_size, policy=Policy(args.policy),
                          threshold=0.0)
    oracle = exact.exact_dp if args.oracle == "dp" else exact.brute_force
    failures = []
    for i in range(args.count):
        instance = GENERATORS[kind](args.n, args.seed + i, args.max_window)
        ref = oracle(instance)
        result = solve(instance, config)
        if not ref.feasible:
            ok = not result.found
            shown = "infeasible" if ok else f"solver found {result.solution.cost:.6f}"
        elif not result.found:
            ok, shown = False, "solver found nothing"
        else:
            ok = abs(result.solution.cost - ref.optimal_cost) <= 1e-9
            shown = f"{result.solution.cost:.9f} vs optimum {ref.optimal_cost:.9f}"
        print(f"seed {args.seed + i}: {'PASS' if ok else 'FAIL'} ({shown})")
        if not ok:
            failures.append(args.seed + i)
    print(f"{args.count - len(failures)}/{args.count} passed")
    if failures:
        print(f"failing seeds: {failures}")
        return 1
    return 0


def cmd_bench(args) -> int:
    paths = _instance_paths(args.instances)
    sparsifications: list[tuple[float | None, int | None]] = \
        [(t, None) for t in args.beam_thresholds] + [(None, k) for k in args.knns]
    if not sparsifications:
        sparsifications = [(1e-5, None)]
    settings = args.dominance.split(",")
    if any(d not in ("on", "off") for d in settings):
        raise ValueError(f"--dominance must list 'on'/'off', got {args.dominance!r}")
    dominances = [d == "on" for d in settings]
    configs = [
        _config_from_args(args, beam_size=b, policy=p, threshold=t, knn=k, dominance=d)
        for b in args.beam_sizes for p in args.policies
        for (t, k) in sparsifications for d in dominances
    ]
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    all_rows: list[tuple[str, ReportRow]] = []
    summary_lines = ["config,mean_cost,mean_time"]
    for config in configs:
        label = (f"B={config.beam_size}|{config.policy.value}|"
                 f"{_sparsification_label(config)}|dom="
                 f"{'on' if config.dominance_enabled else 'off'}")
        rows = _run_solves(paths, args.heatmap_dir, config, None, args.jobs)
        all_rows.extend((label, r) for r in rows)
        costs = [r.cost for r in rows if r.cost is not None]
        mean_cost = sum(costs) / len(costs) if costs else math.nan
        mean_time = sum(r.solve_time for r in rows) / len(rows)
        summary_lines.append(f"{label},{mean_cost!r},{mean_time:.6f}")
    lines = ["config," + ",".join(REPORT_COLUMNS)]
    lines += [f"{label},{row.csv()}" for label, row in all_rows]
    (out / "bench_rows.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    (out / "bench_summary.csv").write_text("\n".join(summary_lines) + "\n",
                                           encoding="utf-8")
    print("\n".join(summary_lines))
    return 0


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="routedp",
                                     description="Heatmap-guided beam DP routing solver")
    sub = parser.add_subparsers(dest="command", required=True)

    def common_solver_flags(p, dominance_list=False):
        p.add_argument("--problem", choices=[k.value for k in ProblemKind])
        p.add_argument("--instances", required=True)
        p.add_argument("--heatmap-dir")
        p.add_argument("--policy", default=Policy.HEAT_POTENTIAL.value,
                       choices=[v.value for v in Policy])
        p.add_argument("--invert-cost-heat", action="store_true")
        if dominance_list:
            # bench sweeps dominance settings, e.g. --dominance on,off
            p.add_argument("--dominance", default="on")
        else:
            p.add_argument("--dominance", choices=["on", "off"], default="on")
        p.add_argument("--score-bound-prefilter", choices=["on", "off"], default="off")
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--out")

    ps = sub.add_parser("solve", help="solve instances and write a report")
    common_solver_flags(ps)
    ps.add_argument("--beam-size", type=int, required=True)
    ps.add_argument("--threshold", type=float, default=None)
    ps.add_argument("--knn", type=int, default=None)
    ps.add_argument("--ref-costs")
    ps.add_argument("--json", action="store_true")
    ps.set_defaults(func=cmd_solve)

    pg = sub.add_parser("generate", help="generate random instance files")
    pg.add_argument("--problem", required=True, choices=[k.value for k in ProblemKind])
    pg.add_argument("--n", type=int, required=True)
    pg.add_argument("--count", type=int, default=1)
    pg.add_argument("--seed", type=int, default=0)
    pg.add_argument("--max-window", type=float, default=1000.0)
    pg.add_argument("--out", required=True)
    pg.set_defaults(func=cmd_generate)

    pv = sub.add_parser("verify", help="check solve output against exact oracles")
    pv.add_argument("--problem", required=True, choices=[k.value for k in ProblemKind])
    pv.add_argument("--n", type=int, required=True)
    pv.add_argument("--count", type=int, default=10)
    pv.add_argument("--seed", type=int, default=0)
    pv.add_argument("--max-window", type=float, default=1000.0)
    pv.add_argument("--beam-size", type=int, required=True)
    pv.add_argument("--policy", default=Policy.COST_HEAT_POTENTIAL.value,
                    choices=[v.value for v in Policy])
    pv.add_argument("--oracle", choices=["brute", "dp"], default="brute")
    pv.set_defaults(func=cmd_verify)

    pb = sub.add_parser("bench", help="sweep configurations and emit a table")
    common_solver_flags(pb, dominance_list=True)
    pb.add_argument("--beam-sizes", type=_int_list, required=True)
    pb.add_argument("--beam-thresholds", "--thresholds", type=_float_list,
                    default=[], dest="beam_thresholds")
    pb.add_argument("--knns", type=_int_list, default=[])
    pb.add_argument("--policies", type=lambda s: s.split(","),
                    default=[Policy.COST_HEAT_POTENTIAL.value])
    pb.set_defaults(func=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threshold", None) is not None and getattr(args, "knn", None) is not None:
        parser.error("--threshold and --knn are mutually exclusive")
    try:
        return args.func(args)
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
