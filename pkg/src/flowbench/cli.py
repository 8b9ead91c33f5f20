"""Command-line interface: sample, generate, evaluate, baseline, stats, plot.

Exit codes: 0 success, 1 usage error, 2 partial failure, 3 total failure.
A JSON config file (--config) supplies defaults; explicit flags override it.
The FLOWBENCH_WORKERS environment variable overrides the default worker
count.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import dataset as ds
from . import metrics as mt
from . import pipeline
from .baselines import BASELINE_KINDS, baseline_predict
from .errors import FlowbenchError
from .metrics import write_prediction
from .params import (
    VARIANT_IDS,
    get_variant,
    read_design_points,
    sample_design_points,
    validate_design_point,
    write_design_points,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARTIAL = 2
EXIT_TOTAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _add_generation_flags(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--steps", type=int, default=300)
    p.add_argument("--coarse-edge", type=float, default=pipeline.DEFAULT_COARSE_EDGE_LEN,
                   help="coarse-mesh target edge length in meters")
    p.add_argument("--fine-factor", type=float, default=pipeline.DEFAULT_FINE_FACTOR)
    p.add_argument("--rho", type=float, default=1.225)
    p.add_argument("--mu", type=float, default=1.7894e-5)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--npz-export", action="store_true")
    p.add_argument("--stabilization", choices=("upwind", "supg"), default="upwind")


def build_parser() -> _Parser:
    parser = _Parser(prog="flowbench")
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON file of flag defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", parents=[], help="draw design points")
    p.add_argument("--variant", required=True, choices=VARIANT_IDS)
    p.add_argument("-n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("generate", help="simulate datapoints and package a dataset")
    p.add_argument("--variant", action="append", choices=VARIANT_IDS, default=None,
                   help="repeatable; defaults to base")
    p.add_argument("--dps", type=Path, default=None,
                   help="design-point list file (else sampled from --variant/-n)")
    p.add_argument("-n", type=int, default=16)
    p.add_argument("--out", type=Path, required=True)
    _add_generation_flags(p)

    p = sub.add_parser("evaluate", help="score prediction files against a dataset")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--pred", type=Path, default=None,
                   help="single prediction root (performance scores only)")
    p.add_argument("--run", action="append", default=[],
                   metavar="ORIGIN=PATH",
                   help="labeled prediction root; repeat to build the GS matrix")
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("baseline", help="emit analytic baseline predictions")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--kind", choices=BASELINE_KINDS, required=True)
    p.add_argument("--variant", action="append", choices=VARIANT_IDS, default=None)
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("stats", help="recompute and print dataset statistics")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--variant", action="append", choices=VARIANT_IDS, default=None)

    p = sub.add_parser("plot", help="render field snapshots or score tables")
    p.add_argument("--data", type=Path, default=None)
    p.add_argument("--variant", choices=VARIANT_IDS, default=None)
    p.add_argument("--dp", type=int, default=None)
    p.add_argument("--timesteps", type=int, nargs="+", default=[0, 5, 10, 20])
    p.add_argument("--report", type=Path, default=None)
    p.add_argument("--out", type=Path, required=True)
    return parser


def _apply_config(parser: _Parser, argv: list[str]) -> argparse.Namespace:
    ns, _ = parser.parse_known_args(argv)
    if getattr(ns, "config", None):
        defaults = json.loads(Path(ns.config).read_text(encoding="utf-8"))
        parser.set_defaults(**defaults)
        # Subparsers re-apply their own defaults, so push matching keys down.
        for action in parser._actions:
            if isinstance(action, argparse._SubParsersAction):
                for sub in action.choices.values():
                    known = {a.dest for a in sub._actions}
                    sub.set_defaults(**{k: v for k, v in defaults.items()
                                        if k in known})
    return parser.parse_args(argv)


def cmd_sample(args) -> int:
    if args.n < 1:
        print("error: -n must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    points = sample_design_points(args.variant, args.n, args.seed)
    bad = [(dp.index, v) for dp in points if (v := validate_design_point(dp))]
    if bad:
        print(f"error: {len(bad)} infeasible design points remain: {bad[:3]}",
              file=sys.stderr)
        return EXIT_TOTAL
    write_design_points(points, args.out)
    print(f"wrote {len(points)} design points to {args.out}")
    return EXIT_OK


def cmd_generate(args) -> int:
    variants = args.variant or ["base"]
    workers = args.workers if args.workers is not None else pipeline.default_workers()
    config = pipeline.RunConfig(
        variants=variants, n=args.n, seed=args.seed, dt=args.dt, steps=args.steps,
        coarse_edge_len=args.coarse_edge, fine_factor=args.fine_factor,
        rho=args.rho, mu=args.mu, out_root=str(args.out), workers=workers,
        npz_export=args.npz_export, stabilization=args.stabilization)

    failures = 0
    total = 0
    for variant in variants:
        dps = None
        if args.dps is not None:
            dps = [dp for dp in read_design_points(args.dps)
                   if dp.variant and dp.variant.id == variant]
            if not dps:
                print(f"error: no design points for {variant} in {args.dps}",
                      file=sys.stderr)
                return EXIT_USAGE
            config.n = len(dps)
        manifest = pipeline.generate_variant(variant, config, design_points=dps)
        bad = [e for e in manifest.datapoints if e["status"] != "ok"]
        failures += len(bad)
        total += manifest.count
        ratios = [e["node_ratio"] for e in manifest.datapoints if "node_ratio" in e]
        print(f"{variant}: {manifest.count - len(bad)}/{manifest.count} datapoints ok"
              + (f", fine/coarse node ratio {min(ratios):.2f}..{max(ratios):.2f}"
                 if ratios else ""))
        for e in bad:
            print(f"  dp_{e['index']} failed: {e['error']}")
    if failures == total:
        return EXIT_TOTAL
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_evaluate(args) -> int:
    runs: dict[str, Path] = {}
    for spec in args.run:
        origin, sep, path = spec.partition("=")
        if not sep:
            print(f"error: --run wants ORIGIN=PATH, got {spec!r}", file=sys.stderr)
            return EXIT_USAGE
        runs[origin.lower()] = Path(path)
    if args.pred is not None:
        runs.setdefault("model", Path(args.pred))
    if not runs:
        print("error: give --pred or at least one --run", file=sys.stderr)
        return EXIT_USAGE
    payload = pipeline.evaluate_runs(args.data, runs, horizon=args.horizon,
                                     split=args.split)
    jpath, cpath = mt.write_report(payload, args.out, "scores")
    print(f"wrote {jpath} and {cpath}")
    for origin, targets in payload["performance"].items():
        for target, rep in targets.items():
            print(f"  PS[{origin}->{target}] = {rep['ps_mean']:.4f}")
    if "surf_gs" in payload:
        s = payload["surf_gs"]
        print(f"  aspect scores: mesh {s['mesh']:.3f} topology {s['topology']:.3f} "
              f"range {s['range']:.3f} dynamic {s['dynamic']:.3f} "
              f"average {s['average']:.3f}")
    return EXIT_OK


def cmd_baseline(args) -> int:
    variants = args.variant
    if variants is None:
        variants = [d.name for d in sorted(Path(args.data).iterdir())
                    if d.is_dir() and ds.manifest_path(args.data, d.name).exists()]
    if not variants:
        print(f"error: no variants with manifests under {args.data}", file=sys.stderr)
        return EXIT_USAGE
    for variant in variants:
        gts = pipeline.load_split_packages(args.data, variant, args.split)
        manifest = ds.read_manifest(args.data, variant)
        stored = manifest.steps
        horizon = min(args.horizon, stored) if args.horizon else min(mt.FULL_HORIZON, stored)
        for gt in gts:
            write_prediction(baseline_predict(args.kind, gt, horizon),
                             args.out, variant)
        print(f"{variant}: wrote {len(gts)} {args.kind} predictions (H={horizon})")
    return EXIT_OK


def cmd_stats(args) -> int:
    variants = args.variant
    if variants is None:
        variants = [d.name for d in sorted(Path(args.data).iterdir())
                    if d.is_dir() and ds.manifest_path(args.data, d.name).exists()]
    for variant in variants:
        manifest = ds.read_manifest(args.data, variant)
        print(f"{variant}: {manifest.count} datapoints, {manifest.steps} steps, "
              f"dt {manifest.dt}")
        for q, s in manifest.stats.items():
            print(f"  {q:12s} mean {s['mean']:12.4f}  std {s['std']:12.4f}")
        splits = {k: len(v) for k, v in manifest.splits.items()}
        print(f"  splits {splits}")
    return EXIT_OK


def cmd_plot(args) -> int:
    from . import plotting

    wrote_any = False
    skipped = 0
    if args.report is not None:
        files = plotting.plot_report(args.report, args.out)
        print(f"wrote {len(files)} score figures to {args.out}")
        wrote_any |= bool(files)
    if args.data is not None:
        if args.variant is None or args.dp is None:
            print("error: snapshot plotting needs --variant and --dp", file=sys.stderr)
            return EXIT_USAGE
        files, skipped = plotting.plot_snapshots(args.data, args.variant, args.dp,
                                                 args.timesteps, args.out)
        print(f"wrote {len(files)} snapshots to {args.out}"
              + (f" ({skipped} timesteps skipped)" if skipped else ""))
        wrote_any |= bool(files)
    if not wrote_any and args.report is None and args.data is None:
        print("error: nothing to plot; give --data or --report", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_PARTIAL if skipped else EXIT_OK


_COMMANDS = {
    "sample": cmd_sample,
    "generate": cmd_generate,
    "evaluate": cmd_evaluate,
    "baseline": cmd_baseline,
    "stats": cmd_stats,
    "plot": cmd_plot,
}


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except FlowbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TOTAL
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_TOTAL


if __name__ == "__main__":
    raise SystemExit(main())
