"""Command-line front end: solve, compare, fit, validate, gantt.

Exit codes: 0 success, 1 usage or input error, 2 infeasible taskset,
3 schedule failed validation.
"""

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence

from .bundled import data_dir
from .formulations import (ALGORITHMS, DISCRETE_ALGORITHMS, GP_NODVFS, GP_SDISCRETE, GP_SVFS,
                           LP_DVFS, NLP_DVFS, InfeasibleError, solve)
from .power import (ProcessorSpec, fit_power_model, load_processor, mape, processor_to_dict,
                    total_energy)
from .schedule import gantt_csv, load_schedule, minlp_point, realize, schedule_to_dict, validate
from .taskmodel import fraction_str, load_taskset, minimum_density

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_INVALID = 0, 1, 2, 3

MODES = {
    "continuous": (NLP_DVFS, GP_SVFS, GP_NODVFS),
    "discrete": (LP_DVFS, GP_SDISCRETE, GP_NODVFS),
    "all": ALGORITHMS,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def platform_model(spec: ProcessorSpec, algorithm: str):
    """Power model matching the algorithm's platform assumption."""
    if algorithm in DISCRETE_ALGORITHMS:
        if not spec.levels:
            raise UsageError(f"{algorithm} needs a processor with discrete speed levels")
        return spec.model(discrete=True)
    if algorithm == GP_NODVFS and spec.levels and max(spec.levels) == 1:
        return spec.model(discrete=True)
    return spec.model(discrete=False)


def _infeasible(exc: InfeasibleError) -> str:
    return f"infeasible: {exc}; every algorithm here assumes D ≤ m"


def run_solve(ts, spec, algorithm, m, grid_levels=256, basis="objective", certify=False):
    """Solve, realize and validate; returns ``(schedule, summary)``."""
    pm = platform_model(spec, algorithm)
    plan, alloc = solve(algorithm, ts, pm, m, grid_levels)
    sched = realize(plan)
    report = validate(sched, ts, plan.power, m)
    if not report.ok:
        raise RuntimeError("realized schedule failed validation:\n" + report.text())
    energy = total_energy(sched, plan.power)
    point, _ = minlp_point(sched, ts, plan.power, plan.grid)
    intervals = []
    for mu in range(plan.grid.N):
        intervals.append({"index": mu, "start": fraction_str(plan.grid.start(mu)),
                          "end": fraction_str(plan.grid.end(mu)),
                          "speeds": plan.interval_speeds(mu)})
    summary = {
        "taskset": ts.name, "processor": spec.name, "algorithm": algorithm, "m": m,
        "density": float(minimum_density(ts)), "horizon": fraction_str(plan.horizon),
        "basis": basis, "energy": energy.on_basis(basis),
        "objective_energy": energy.objective, "total_energy": energy.total,
        "formulation_objective": plan.formulation_objective,
        "minor_steps": point.M, "intervals": intervals,
    }
    if algorithm == NLP_DVFS:
        summary["grid_levels"] = grid_levels
    if alloc is not None:
        summary["processor_speeds"] = [float(s) for s in alloc.speeds]
    if certify:
        if plan.lp_problem is not None:
            summary["certificate"] = plan.certify().summary()
        else:
            summary["certificate"] = None
            summary["certificate_note"] = f"{algorithm} is not solved as an LP"
    return sched, summary


def cmd_solve(args) -> int:
    ts = load_taskset(args.taskset)
    spec = load_processor(args.proc)
    try:
        sched, summary = run_solve(ts, spec, args.alg, args.m, args.grid_levels, args.basis,
                                   args.certify)
    except InfeasibleError as exc:
        print(_infeasible(exc), file=sys.stderr)
        return EXIT_INFEASIBLE
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    prefix = args.prefix or f"{Path(args.taskset).stem}_{args.alg}"
    (out / f"{prefix}.schedule.json").write_text(
        json.dumps(schedule_to_dict(sched), indent=1) + "\n")
    (out / f"{prefix}.gantt.csv").write_text(gantt_csv(sched))
    text = json.dumps(summary, indent=1) + "\n"
    (out / f"{prefix}.summary.json").write_text(text)
    if not args.quiet:
        sys.stdout.write(text)
    return EXIT_OK


def _cell(payload):
    path, proc_path, algorithm, m, grid_levels, basis = payload
    ts = load_taskset(path)
    spec = load_processor(proc_path)
    try:
        pm = platform_model(spec, algorithm)
        plan, _ = solve(algorithm, ts, pm, m, grid_levels)
    except (InfeasibleError, UsageError, RuntimeError, ValueError) as exc:
        return None, f"{ts.name} {algorithm}: {exc}"
    e = plan.formulation_objective
    if basis == "total":
        e += m * float(plan.horizon) * pm.p_idle
    return e, None


def compare_table(taskset_paths: Sequence[Path], proc_path, m: int, mode="all",
                  basis="objective", grid_levels=256, jobs=1):
    """Normalized energy table; returns ``(csv_text, failures)``."""
    algs = MODES[mode]
    sets = [(minimum_density(load_taskset(p)), load_taskset(p).name, p) for p in taskset_paths]
    sets.sort(key=lambda t: (t[0], t[1]))
    payloads = [(str(p), str(proc_path), a, m, grid_levels, basis)
                for _, _, p in sets for a in algs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_cell, payloads))
    else:
        results = [_cell(p) for p in payloads]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["taskset", "density"] + list(algs))
    failures = []
    for r, (D, name, _) in enumerate(sets):
        row = dict(zip(algs, results[r * len(algs):(r + 1) * len(algs)]))
        ref = row[GP_NODVFS][0] if GP_NODVFS in row else None
        cells = []
        for a in algs:
            e, err = row[a]
            if err:
                failures.append(err)
            if e is None or not ref:
                cells.append("FAILED")
            else:
                cells.append(f"{e / ref:.6f}")
        w.writerow([name, f"{float(D):.6g}"] + cells)
    return buf.getvalue(), failures


def cmd_compare(args) -> int:
    root = Path(args.tasksets) if args.tasksets else Path(str(data_dir("tasksets")))
    paths = sorted(root.glob("*.json"))
    if not paths:
        raise UsageError(f"{root}: no taskset files")
    text, failures = compare_table(paths, args.proc, args.m, args.mode, args.basis,
                                   args.grid_levels, args.jobs)
    for f in failures:
        print(f"failed cell: {f}", file=sys.stderr)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_fit(args) -> int:
    spec = load_processor(args.samples)
    if len(spec.samples) < 3:
        raise UsageError(f"{args.samples}: fitting needs at least 3 samples")
    p_idle = spec.p_idle if args.p_idle is None else args.p_idle
    f_max = spec.f_max if args.f_max is None else args.f_max
    pm = fit_power_model(spec.samples, p_idle, f_max, spec.s_min, spec.name)
    err = mape(pm, spec.samples)
    spec.p_idle, spec.f_max = p_idle, f_max
    spec.fitted = {"alpha": pm.alpha, "beta": pm.beta, "p_static": pm.p_static, "mape": err}
    text = json.dumps(processor_to_dict(spec), indent=1) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    print(f"{spec.name or args.samples}: alpha={pm.alpha:.6g} beta={pm.beta:.6g} "
          f"p_static={pm.p_static:.6g} MAPE={err:.4f}%",
          file=sys.stderr if not args.out else sys.stdout)
    if not args.out:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_validate(args) -> int:
    sched = load_schedule(args.schedule)
    ts = load_taskset(args.taskset)
    spec = load_processor(args.proc)
    m = args.m if args.m is not None else sched.m
    platform = args.platform
    if platform == "auto":
        levels = set(spec.levels)
        platform = ("discrete" if levels and all(s.speed in levels for s in sched.segments)
                    else "continuous")
    pm = spec.model(discrete=platform == "discrete")
    report = validate(sched, ts, pm, m)
    if report.ok:
        print("valid")
        return EXIT_OK
    print(report.text())
    return EXIT_INVALID


def cmd_gantt(args) -> int:
    text = gantt_csv(load_schedule(args.schedule))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="dvfsched", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="solve one taskset and emit schedule, Gantt CSV, summary")
    p.add_argument("--alg", required=True, choices=ALGORITHMS)
    p.add_argument("--taskset", required=True)
    p.add_argument("--proc", required=True)
    p.add_argument("-m", type=int, required=True)
    p.add_argument("--grid-levels", type=int, default=256, help="speed grid size for nlp-dvfs")
    p.add_argument("--basis", choices=("objective", "total"), default="objective")
    p.add_argument("--certify", action="store_true", help="add LP optimality certificate")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--prefix", default=None)
    p.add_argument("-q", "--quiet", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("compare", help="energy table normalized by gp-nodvfs")
    p.add_argument("--tasksets", default=None, help="directory of taskset JSON (default: bundled)")
    p.add_argument("--proc", required=True)
    p.add_argument("-m", type=int, default=2)
    p.add_argument("--mode", choices=tuple(MODES), default="all")
    p.add_argument("--basis", choices=("objective", "total"), default="objective")
    p.add_argument("--grid-levels", type=int, default=256)
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("fit", help="fit alpha, beta, p_static to measured power")
    p.add_argument("samples", help="processor JSON with speed levels and active power")
    p.add_argument("--p-idle", type=float, default=None)
    p.add_argument("--f-max", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("validate", help="check a schedule against a taskset")
    p.add_argument("schedule")
    p.add_argument("--taskset", required=True)
    p.add_argument("--proc", required=True)
    p.add_argument("-m", type=int, default=None)
    p.add_argument("--platform", choices=("auto", "discrete", "continuous"), default="auto")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("gantt", help="schedule JSON to Gantt CSV")
    p.add_argument("schedule")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_gantt)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # --help or a usage error
        return int(exc.code or 0)
    if getattr(args, "m", 1) is not None and getattr(args, "m", 1) < 1:
        print("error: -m must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
