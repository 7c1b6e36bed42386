"""Command-line entry points: refine, generate, analyze, bench.

Exit codes: 0 success, 1 usage error, 2 input validation failure,
3 runtime failure.
"""

from __future__ import annotations

import argparse
import os
import statistics
import sys
import time

from . import formats, stats, synth
from .errors import (InvalidPLC, ParseError, TetrefineError, ValidationError)
from .plc import PLC, validate
from .refine import RefineConfig, refine

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVALID_INPUT = 2
EXIT_RUNTIME = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def default_workers():
    env = os.environ.get("TETREFINE_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _add_refine_flags(sub):
    sub.add_argument("-B", type=float, default=2.0,
                     help="radius-edge ratio bound (default 2.0)")
    sub.add_argument("--max-rounds", type=int, default=500)
    sub.add_argument("--sequential-until", type=int, default=50000,
                     help="run single-worker while the mesh is smaller "
                          "than this many elements (hybrid mode)")
    sub.add_argument("--no-hybrid", action="store_true",
                     help="parallel from the first round")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--verbose", action="store_true",
                     help="one machine-parseable log line per round")


def build_parser():
    p = _Parser(prog="tetrefine",
                description="Parallel Delaunay quality tetrahedral meshing")
    subs = p.add_subparsers(dest="command", required=True)

    pr = subs.add_parser("refine", help="refine a PLC into a quality mesh")
    pr.add_argument("input", help=".poly/.smesh (or bare .node point cloud)")
    pr.add_argument("--node", help="separate .node file for the points")
    pr.add_argument("-o", "--output", required=True,
                    help="output prefix (.node/.ele/.face/.report.json)")
    pr.add_argument("--workers", type=int, default=None)
    _add_refine_flags(pr)

    pg = subs.add_parser("generate", help="generate a synthetic PLC")
    pg.add_argument("-n", type=int, required=True, help="point count")
    pg.add_argument("--gamma", type=float, default=0.0,
                    help="rectangle-to-point ratio")
    pg.add_argument("--dist", choices=("ball", "cube"), default="ball")
    pg.add_argument("--seed", type=int, default=0)
    pg.add_argument("-o", "--output", required=True,
                    help="output prefix (.node/.poly)")

    pa = subs.add_parser("analyze", help="quality report for mesh files")
    pa.add_argument("node")
    pa.add_argument("ele")
    pa.add_argument("-B", type=float, default=2.0)
    pa.add_argument("-o", "--output", help="report path (default stdout)")

    pb = subs.add_parser("bench", help="refine across a worker list and "
                                       "report speedups")
    pb.add_argument("input")
    pb.add_argument("--node")
    pb.add_argument("--workers", required=True,
                    help="comma-separated list, e.g. 1,2,4,8")
    pb.add_argument("--repeats", type=int, default=1,
                    help="runs per worker count; median is reported")
    _add_refine_flags(pb)
    return p


def _load_plc(path, node_path):
    if path.endswith(".node"):
        points, _ = formats.read_node(path)
        plc = PLC(points=points)
        violations = validate(plc)
        if violations:
            raise ValidationError(violations)
        return plc
    return formats.read_plc(path, node_path)


def _config(args, workers):
    return RefineConfig(
        B=args.B, max_rounds=args.max_rounds, workers=workers,
        sequential_until=0 if args.no_hybrid else args.sequential_until,
        seed=args.seed, verbose=args.verbose)


def _cmd_refine(args):
    workers = args.workers if args.workers else default_workers()
    try:
        cfg = _config(args, workers)
    except ValueError as exc:
        raise _UsageError(str(exc))
    plc = _load_plc(args.input, args.node)
    mesh, report = refine(plc, cfg)
    prefix = args.output
    formats.write_mesh(mesh, prefix + ".node", prefix + ".ele",
                       prefix + ".face")
    formats.write_report(report, prefix + ".report.json")
    print(f"vertices={mesh.nv} tets={report.tet_count} "
          f"bad={report.bad_tet_count} skipped={len(report.skipped)} "
          f"time={report.total_time:.2f}s")
    return EXIT_OK


def _cmd_generate(args):
    try:
        spec = synth.SynthSpec(n_points=args.n, gamma=args.gamma,
                               distribution=args.dist, seed=args.seed)
    except ValueError as exc:
        raise _UsageError(str(exc))
    plc = synth.generate(spec)
    formats.write_plc(plc, args.output + ".node", args.output + ".poly")
    print(f"points={len(plc.points)} segments={len(plc.segments)} "
          f"polygons={len(plc.polygons)}")
    return EXIT_OK


def _cmd_analyze(args):
    if args.B <= 0:
        raise _UsageError("B must be positive")
    view = formats.read_mesh_view(args.node, args.ele)
    report = stats.analyze(view, args.B)
    text = formats.report_to_json(report)
    if args.output:
        formats.write_report(report, args.output)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_bench(args):
    try:
        worker_list = [int(w) for w in args.workers.split(",") if w]
    except ValueError:
        raise _UsageError(f"bad worker list {args.workers!r}")
    if not worker_list:
        raise _UsageError("bench requires a non-empty worker list")
    try:
        configs = {w: _config(args, w) for w in worker_list}
    except ValueError as exc:
        raise _UsageError(str(exc))
    plc = _load_plc(args.input, args.node)
    runs = []
    for w in worker_list:
        times = []
        for _ in range(max(1, args.repeats)):
            cfg = configs[w]
            t0 = time.perf_counter()
            refine(plc, cfg)
            times.append(time.perf_counter() - t0)
        runs.append((w, statistics.median(times)))
    for (w, t), (_, s) in zip(runs, stats.speedup_table(runs)):
        print(f"workers={w} time={t:.3f}s speedup={s:.2f}")
    return EXIT_OK


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "refine":
            return _cmd_refine(args)
        if args.command == "generate":
            return _cmd_generate(args)
        if args.command == "analyze":
            return _cmd_analyze(args)
        if args.command == "bench":
            return _cmd_bench(args)
        raise _UsageError(f"unknown command {args.command}")
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, ValidationError, InvalidPLC) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID_INPUT
    except (TetrefineError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
