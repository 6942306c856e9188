"""Command-line front end: ``cpwm run | bench | converge``.

Exit codes: 0 ok, 1 validation error, 2 numerical divergence, 3 comparison
failure, 4 non-convergence.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from importlib import resources
from pathlib import Path

from .config import RunConfig, load_config
from .errors import ComparisonError, CpwmError, NonConvergenceError
from .fields import write_snapshot
from .observables import run_config, run_convergence_cycle
from .oracle import integrate_scattering

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_DIVERGENCE = 2
EXIT_COMPARISON = 3
EXIT_NONCONVERGENCE = 4

#: benchmark suites and the shipped configs they run, in order
SUITES = {
    "eckartA": ("eckartA.cfg", "eckartA_deep.cfg"),
    "eckartB": ("eckartB.cfg",),
    "deep-tunneling": ("eckartB_0.8.cfg", "eckartB_0.4.cfg", "eckartB_0.1.cfg"),
    "uphill-ramp": ("uphill_disc.cfg", "uphill_ramp.cfg"),
    "barrier-ramp": ("barrier_disc.cfg", "barrier_ramp.cfg"),
    "double-barrier": ("double_barrier.cfg",),
}


def benchmark_path(name: str) -> Path:
    return Path(str(resources.files("cpwm") / "benchmarks" / name))


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True)


def _emit(obj, quiet):
    if not quiet:
        print(_dump(obj))


def _write(out_dir, name, obj):
    if out_dir is None:
        return None
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(_dump(obj) + "\n")
    return path


def _oracle_block(config: RunConfig, potential, result):
    orc = integrate_scattering(potential, config.energy, config.mass, config.x_left, config.x_right)
    block = orc.to_dict()
    block["d_refl"] = abs(result.p_refl - orc.p_refl)
    block["d_trans"] = abs(result.p_trans - orc.p_trans)
    return block


def execute_run(config: RunConfig, oracle=False, out_dir=None, snapshot_stride=None):
    """Run one config; returns the result document (a JSON-ready dict)."""
    stride = snapshot_stride if snapshot_stride is not None else config.snapshot_stride
    callback = None
    if stride:
        if stride < 1:
            raise CpwmError("snapshot stride must be a positive integer")
        snap_dir = Path(out_dir or ".") / "snapshots"
        snap_dir.mkdir(parents=True, exist_ok=True)

        def callback(state, cycle):
            if cycle % stride == 0:
                with open(snap_dir / f"snapshot_{cycle:06d}.csv", "w") as fh:
                    write_snapshot(state, fh)

    t0 = time.perf_counter()
    result, state, info = run_config(config, callback=callback)
    wall = time.perf_counter() - t0
    doc = {
        "p_refl": result.p_refl, "u_refl": result.u_refl,
        "p_trans": result.p_trans, "u_trans": result.u_trans,
        "t_final": info.t_final, "n_steps": info.n_steps, "wall_time_s": wall,
        "edge_samples": result.m, "stopped_early": info.stopped_early,
        "grid": result.grid, "notes": info.notes,
        "params_echo": config.to_dict(),
    }
    if oracle:
        doc["oracle"] = _oracle_block(config, config.build_potential(), result)
    return doc


def _compare(doc, config: RunConfig):
    """Failing comparisons of a run document against config tolerances."""
    failures = []
    orc = doc.get("oracle")
    if orc is None:
        return failures
    for name, tol in (("refl", config.tol_refl), ("trans", config.tol_trans)):
        if tol is not None and orc["d_" + name] > tol:
            failures.append(f"|p_{name} - oracle| = {orc['d_' + name]:.3g} > {tol:.3g}")
    return failures


def cmd_run(args) -> int:
    config = load_config(args.config)
    doc = execute_run(config, oracle=args.oracle, out_dir=args.out,
                      snapshot_stride=args.snapshot_stride)
    failures = _compare(doc, config)
    if failures:
        doc["comparison_failures"] = failures
    _write(args.out, "result.json", doc)
    _emit(doc, args.quiet)
    return EXIT_COMPARISON if failures else EXIT_OK


def bench_rows(suite: str, log=None) -> list:
    """Run every config of ``suite``; one row per compared quantity."""
    rows = []
    for name in SUITES[suite]:
        config = load_config(benchmark_path(name))
        bench = config.bench
        need_oracle = any(bench.get(k) == "oracle" for k in ("p_refl", "p_trans"))
        try:
            doc = execute_run(config, oracle=need_oracle)
        except CpwmError as exc:
            # a run that blows up fails every row it would have produced
            for q in [q for q in ("refl", "trans") if bench.get("p_" + q) is not None]:
                ref = bench["p_" + q]
                rows.append({"suite": suite, "config": name, "label": bench.get("label", name),
                             "quantity": "p_" + q, "computed": math.nan, "uncertainty": math.nan,
                             "reference": math.nan if ref == "oracle" else float(ref),
                             "source": "oracle" if ref == "oracle" else "reference",
                             "error": math.nan, "tolerance": float(bench.get("tol_" + q, math.inf)),
                             "passed": False, "wall_time_s": math.nan,
                             "failure": f"{type(exc).__name__}: {exc}"})
                if log:
                    log(rows[-1])
            continue
        for q in ("refl", "trans"):
            ref = bench.get("p_" + q)
            if ref is None:
                continue
            source = "oracle" if ref == "oracle" else "reference"
            ref_value = doc["oracle"]["p_" + q] if ref == "oracle" else float(ref)
            tol = float(bench.get("tol_" + q, math.inf))
            err = abs(doc["p_" + q] - ref_value)
            rows.append({"suite": suite, "config": name, "label": bench.get("label", name),
                         "quantity": "p_" + q, "computed": doc["p_" + q],
                         "uncertainty": doc["u_" + q], "reference": ref_value,
                         "source": source, "error": err, "tolerance": tol,
                         "passed": bool(err <= tol), "wall_time_s": doc["wall_time_s"]})
            if log:
                log(rows[-1])
        if "unitarity_tol" in bench:
            defect = abs(doc["p_refl"] + doc["p_trans"] - 1.0)
            tol = float(bench["unitarity_tol"])
            rows.append({"suite": suite, "config": name, "label": bench.get("label", name),
                         "quantity": "unitarity", "computed": doc["p_refl"] + doc["p_trans"],
                         "uncertainty": doc["u_refl"] + doc["u_trans"], "reference": 1.0,
                         "source": "exact", "error": defect, "tolerance": tol,
                         "passed": bool(defect <= tol), "wall_time_s": doc["wall_time_s"]})
            if log:
                log(rows[-1])
    return rows


def format_row(row) -> str:
    mark = "PASS" if row["passed"] else "FAIL"
    return (f"{mark}  {row['label']:<34s} {row['quantity']:<9s} {row['computed']:.7g} "
            f"(ref {row['reference']:.7g}, {row['source']})  err {row['error']:.2e} "
            f"<= {row['tolerance']:.1e}  [{row['wall_time_s']:.1f} s]"
            + (f"  {row['failure']}" if "failure" in row else ""))


def cmd_bench(args) -> int:
    suites = list(SUITES) if args.suite == "all" else [args.suite]
    failed = []
    for suite in suites:
        log = None if args.quiet else (lambda r: print(format_row(r), flush=True))
        rows = bench_rows(suite, log=log)
        report = {"suite": suite, "passed": all(r["passed"] for r in rows), "rows": rows}
        _write(args.out, f"bench_{suite}.json", report)
        failed += [r for r in rows if not r["passed"]]
    if failed:
        print(_dump({"error": ComparisonError.kind, "exit_code": EXIT_COMPARISON,
                     "failed_rows": failed}))
        return EXIT_COMPARISON
    return EXIT_OK


def cmd_converge(args) -> int:
    config = load_config(args.config)
    tol_refl = args.tol_refl if args.tol_refl is not None else config.tol_refl
    tol_trans = args.tol_trans if args.tol_trans is not None else config.tol_trans
    log = None
    if not args.quiet:
        def log(rec):
            print(f"cycle {rec.cycle} {rec.param:<8s} {rec.value!s:<24s} "
                  f"P_refl {rec.p_refl:.7g} +- {rec.u_refl:.1e}  "
                  f"P_trans {rec.p_trans:.7g} +- {rec.u_trans:.1e}  "
                  f"{'adopted' if rec.accepted and rec.param != 'base' else 'kept'}",
                  file=sys.stderr, flush=True)
    report = run_convergence_cycle(config, tol_refl, tol_trans, max_trials=args.max_trials,
                                   log=log)
    doc = report.to_dict()
    _write(args.out, "convergence.json", doc)
    _emit(doc, args.quiet)
    return EXIT_OK if report.converged else NonConvergenceError.exit_code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cpwm", description=(
        "Bipolar counterpropagating-wave solver for 1D stationary scattering."))
    sub = parser.add_subparsers(dest="verb", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", metavar="DIR", help="directory for JSON/CSV output")
    common.add_argument("--quiet", action="store_true", help="suppress stdout output")

    run = sub.add_parser("run", parents=[common], help="propagate one configuration")
    run.add_argument("--config", required=True, metavar="PATH")
    run.add_argument("--oracle", action="store_true",
                     help="compare with the Numerov reference solution")
    run.add_argument("--snapshot-stride", type=int, metavar="K",
                     help="write field snapshots every K shift cycles")
    run.set_defaults(func=cmd_run)

    bench = sub.add_parser("bench", parents=[common], help="run a shipped benchmark suite")
    bench.add_argument("suite", choices=[*SUITES, "all"])
    bench.set_defaults(func=cmd_bench)

    conv = sub.add_parser("converge", parents=[common], help="cyclic convergence study")
    conv.add_argument("--config", required=True, metavar="PATH")
    conv.add_argument("--tol-refl", type=float)
    conv.add_argument("--tol-trans", type=float)
    conv.add_argument("--max-trials", type=int, default=40)
    conv.set_defaults(func=cmd_converge)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CpwmError as exc:
        doc = {"error": exc.kind, "message": str(exc), "exit_code": exc.exit_code}
        key = getattr(exc, "key", None)
        if key is not None:
            doc["key"] = key
        print(_dump(doc))
        _write(getattr(args, "out", None), "error.json", doc)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
