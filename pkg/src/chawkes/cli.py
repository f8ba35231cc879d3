"""Command-line front end.

Every command writes ``manifest.json`` into its output directory before any
result; ``chawkes replay manifest.json`` re-runs it.  Exit codes:

    0  success / geometrically ergodic
    2  invalid arguments or model document
    3  constraint variable left {1, 2, ...} during simulation
    4  transient
    5  inconclusive, or scaling experiment on an uncertified model
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core import initial_state, simulate, write_events_csv
from .ergodicity import GEOMETRIC, TRANSIENT, MCSettings, analyze
from .estimate import MIN_REPLICATIONS, fclt_experiment
from .exceptions import SpecParseError, SpecValidationError, StatePositivityViolation
from .lob import mid_price_scaling_demo, mid_price_series, spread_series
from .model import lob_preset, mid_price_weights, read_spec, write_spec

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_POSITIVITY = 3
EXIT_TRANSIENT = 4
EXIT_INCONCLUSIVE = 5

_CLASS_EXIT = {GEOMETRIC: EXIT_OK, TRANSIENT: EXIT_TRANSIENT}


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _weights(text: str, spec) -> np.ndarray:
    if text == "mid":
        if spec.p != 4:
            raise UsageError("weight alias 'mid' needs the 4-mark order book model")
        return mid_price_weights()
    w = _floats(text)
    if len(w) != spec.p:
        raise UsageError(f"--w has {len(w)} values, expected p={spec.p}")
    return np.array(w)


def _dump(path: Path, payload):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_manifest(args, argv, spec, stop, outputs):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _dump(out / "manifest.json", {
        "command": args.command,
        "argv": list(argv),
        "spec_path": str(args.spec),
        "spec_hash": spec.digest(),
        "seed": getattr(args, "seed", None),
        "stop": stop,
        "outputs": sorted(outputs),
        "tool_version": __version__,
    })
    return out


def _mc(args) -> MCSettings:
    return MCSettings(events=args.mc_events, replications=args.mc_reps, seed=args.seed)


# -- commands ----------------------------------------------------------------

def cmd_validate(args, argv):
    spec = read_spec(args.spec)
    print(f"valid: p={spec.p} q={spec.q} hash={spec.digest()[:16]}")
    return EXIT_OK


def cmd_preset(args, argv):
    mu0 = _floats(args.mu0)
    rows = [_floats(r) for r in args.fertility.split(";")]
    spec = lob_preset(mu0, rows, beta=args.beta, mu0_null=args.mu0_null)
    write_spec(spec, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_simulate(args, argv):
    spec = read_spec(args.spec)
    if (args.events is None) == (args.horizon is None):
        raise UsageError("give exactly one of --events and --horizon")
    init = initial_state(spec, S=[int(x) for x in _floats(args.init_s)] if args.init_s else None)
    stop = {"events": args.events} if args.events is not None else {"horizon": args.horizon}
    outputs = ["events.csv", "summary.json"] + (["events.png"] if args.figures else [])
    out = _write_manifest(args, argv, spec, stop, outputs)
    log = simulate(spec, init, n_events=args.events, horizon=args.horizon, seed=args.seed,
                   snapshots=not args.no_snapshots)
    write_events_csv(log, out / "events.csv", snapshots=not args.no_snapshots)
    counts = np.bincount(log.marks, minlength=spec.p + 1)
    _dump(out / "summary.json", {
        "events": len(log),
        "end_time": log.end_time,
        "mark_counts": [int(c) for c in counts],
        "final_S": [int(s) for s in log.final.S],
        "final_lambda": [float(x) for x in log.final.lam],
    })
    if args.figures:
        from .plotting import plot_event_log

        plot_event_log(log, spec, out / "events.png")
    print(f"{len(log)} events up to t={log.end_time:.6g} -> {out / 'events.csv'}")
    return EXIT_OK


def cmd_check(args, argv):
    spec = read_spec(args.spec)
    out = _write_manifest(args, argv, spec, {"mc_events": args.mc_events, "mc_reps": args.mc_reps},
                          ["report.json", "report.txt"])
    report = analyze(spec, K=args.K, max_len=args.max_len, mc=_mc(args), threads=args.threads)
    _dump(out / "report.json", report.to_dict())
    text = report.render()
    (out / "report.txt").write_text(text + "\n", encoding="utf-8")
    print(text)
    return _CLASS_EXIT.get(report.classification.label, EXIT_INCONCLUSIVE)


def cmd_fclt(args, argv):
    spec = read_spec(args.spec)
    if args.reps < MIN_REPLICATIONS:
        raise UsageError(f"--reps must be at least {MIN_REPLICATIONS}, got {args.reps}")
    w = _weights(args.w, spec)
    t_grid = np.array(_floats(args.tgrid))
    outputs = ["replications.csv", "diagnostics.json"] + (["fclt.png"] if args.figures else [])
    out = _write_manifest(args, argv, spec, {"horizon": args.T, "reps": args.reps}, outputs)
    if not args.force:
        report = analyze(spec, K=args.K, max_len=args.max_len, mc=_mc(args), threads=args.threads)
        if report.classification.label != GEOMETRIC:
            print(f"model is {report.classification.label}: "
                  + "; ".join(report.classification.reasons[-1:]) + " (use --force to run anyway)",
                  file=sys.stderr)
            return EXIT_INCONCLUSIVE
    res = fclt_experiment(spec, w, args.T, args.reps, t_grid, seed=args.seed, threads=args.threads)
    with open(out / "replications.csv", "w", encoding="utf-8") as fh:
        fh.write("rep,t,value\n")
        for r, t, v in res.rows():
            fh.write(f"{r},{t:.17g},{v:.17g}\n")
    _dump(out / "diagnostics.json", {"pilot": res.pilot.to_dict(), **res.diagnostics})
    if args.figures:
        from .plotting import plot_fclt

        plot_fclt(res, out / "fclt.png")
    d = res.diagnostics
    print(f"E(w)={res.pilot.E_w:.6g}  diffusion v/E[delta]={res.pilot.diffusion:.6g}"
          f" (increments {d['diffusion_increments']:.6g})  endpoint var={d['endpoint_variance']:.6g}"
          f"  KS p={d['ks_pvalue']:.3g}")
    return EXIT_OK


def cmd_lob_demo(args, argv):
    spec = read_spec(args.spec)
    if spec.p != 4 or spec.q != 1:
        raise UsageError("lob-demo needs the 4-mark, 1-constraint order book model")
    if args.reps < MIN_REPLICATIONS:
        raise UsageError(f"--reps must be at least {MIN_REPLICATIONS}, got {args.reps}")
    horizons = _floats(args.T)
    outputs = ["report.json", "mid_price.csv", "spread.csv"] + (["lob.png"] if args.figures else [])
    out = _write_manifest(args, argv, spec, {"horizons": horizons, "reps": args.reps}, outputs)
    report = mid_price_scaling_demo(spec, horizons, args.reps, seed=args.seed, threads=args.threads)
    _dump(out / "report.json", report.to_dict())
    # Sample path: replication 0 of the longest horizon.
    log = simulate(spec, initial_state(spec), horizon=max(horizons), seed=args.seed, stream=1, snapshots=False)
    mid = mid_price_series(log, args.p0)
    spread = spread_series(log)
    mid.write_csv(out / "mid_price.csv")
    spread.write_csv(out / "spread.csv")
    if args.figures:
        from .plotting import plot_lob

        plot_lob(mid, spread, report, out / "lob.png")
    for h in report.per_horizon:
        print(f"T={h['horizon']:g}: E(w)={h['E_w']:+.4g}+/-{h['E_w_se']:.2g}  "
              f"diffusion={h['diffusion_per_time']:.4g}+/-{h['diffusion_per_time_se']:.2g}  "
              f"spread var/T={h['spread_scaled_variance']:.4g}")
    return EXIT_OK


def cmd_replay(args, argv):
    manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    return main(manifest["argv"])


# -- parser ------------------------------------------------------------------

def _common(p, seed=True, threads=True):
    p.add_argument("spec", help="model document (JSON)")
    p.add_argument("--out", required=True, help="output directory")
    if seed:
        p.add_argument("--seed", type=int, default=0)
    if threads:
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: CPU count; $CHAWKES_THREADS overrides)")


def _mc_flags(p):
    p.add_argument("--K", type=int, default=5, help="box size for the admissible-path search")
    p.add_argument("--max-len", type=int, default=64, help="longest admissible path searched")
    p.add_argument("--mc-events", type=int, default=200_000, help="events per Monte-Carlo run")
    p.add_argument("--mc-reps", type=int, default=4, help="Monte-Carlo runs per condition")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chawkes", description="Constrained Hawkes process toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a model document")
    p.add_argument("spec")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("preset", help="write the order book model document")
    p.add_argument("--mu0", required=True, help="four immigrant rates, comma-separated")
    p.add_argument("--fertility", required=True, help="4x4 matrix, rows separated by ';'")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--mu0-null", type=float, default=1.0)
    p.add_argument("--out", required=True, help="model document to write")
    p.set_defaults(func=cmd_preset)

    p = sub.add_parser("simulate", help="simulate the embedded chain and export the event log")
    _common(p, threads=False)
    p.add_argument("--events", type=int)
    p.add_argument("--horizon", type=float)
    p.add_argument("--init-s", help="initial constraint vector, comma-separated")
    p.add_argument("--no-snapshots", action="store_true", help="omit S and lambda columns")
    p.add_argument("--figures", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check", help="classify ergodicity")
    _common(p)
    _mc_flags(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("fclt", help="physical-time scaling experiment for a weighted count")
    _common(p)
    _mc_flags(p)
    p.add_argument("--w", required=True, help="comma-separated weights for marks 1..p, or 'mid'")
    p.add_argument("--T", type=float, required=True, help="horizon")
    p.add_argument("--reps", type=int, default=300)
    p.add_argument("--tgrid", default="0,0.25,0.5,0.75,1")
    p.add_argument("--force", action="store_true", help="run even if the model is not certified ergodic")
    p.add_argument("--figures", action="store_true")
    p.set_defaults(func=cmd_fclt)

    p = sub.add_parser("lob-demo", help="mid-price diffusion and spread scaling for the order book model")
    _common(p)
    p.add_argument("--T", default="1000,4000", help="comma-separated horizons")
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--p0", type=float, default=0.0, help="initial mid price for the sample path")
    p.add_argument("--figures", action="store_true")
    p.set_defaults(func=cmd_lob_demo)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, argv)
    except (SpecParseError, SpecValidationError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except StatePositivityViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_POSITIVITY


if __name__ == "__main__":
    sys.exit(main())
