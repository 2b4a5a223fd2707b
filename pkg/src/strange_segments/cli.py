"""Command-line entry point.

Subcommands: rate, simulate, segments, verify-strong-law, verify-uldp, plan,
replay. Every run validates the model document first, then writes CSV and/or
a JSON summary plus a manifest sufficient to replay the run byte-for-byte.
Exit codes: 0 success, 1 validation error, 2 numerical failure; errors are
emitted as one JSON object on stderr.

The environment variable STRANGE_SEGMENTS_LOG sets the log level only; it
never affects results.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .errors import ModelValidationError, NumericalError
from .experiments import StrongLawRun, UldpRun, run_strong_law, run_uldp, sla_plan
from .modeldoc import load_model
from .rate_function import RateFunctionCtx, legendre
from .segments import ThresholdSet, r_stat, t_stat
from .simulator import PathConfig, simulate

logger = logging.getLogger(__name__)


def _fmt(x) -> str:
    """CSV cell: floats at 17 significant digits, '.' decimal, None empty."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


class _Parser(argparse.ArgumentParser):
    """argparse that reports bad usage as a validation error (exit 1)."""

    def error(self, message):
        raise ModelValidationError("usage", message)


def _floats(text: str) -> list[float]:
    try:
        return [float(p) for p in text.split(",") if p.strip() != ""]
    except ValueError as exc:
        raise ModelValidationError("number_list", f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text: str) -> list[int]:
    try:
        return [int(p) for p in text.split(",") if p.strip() != ""]
    except ValueError as exc:
        raise ModelValidationError("number_list", f"expected comma-separated integers, got {text!r}") from exc


def _threshold_set(args) -> ThresholdSet:
    if args.set == "interval":
        if args.b is None:
            raise ModelValidationError("interval_endpoints", "--set interval requires --b")
        return ThresholdSet.interval(args.a, args.b)
    if args.b is not None:
        raise ModelValidationError("interval_endpoints", "--b only applies to --set interval")
    return ThresholdSet(args.set, args.a)


def _manifest_config(args) -> dict:
    cfg = {}
    for key, value in sorted(vars(args).items()):
        if key in ("func", "out"):
            continue
        cfg[key] = value
    return cfg


def _emit(args, seed: Optional[int], digest: Optional[str], csv_lines: Optional[list[str]],
          summary: Optional[dict]) -> None:
    """Write the CSV/summary outputs and the run manifest."""
    csv_text = "\n".join(csv_lines) + "\n" if csv_lines is not None else None
    summary_text = (
        json.dumps(summary, sort_keys=True, indent=2) + "\n" if summary is not None else None
    )
    outputs = []
    prefix = args.out
    manifest = {
        "artifact_version": __version__,
        "subcommand": args.subcommand,
        "master_seed": seed,
        "input_digest": digest,
        "config": _manifest_config(args),
        "outputs": outputs,
    }
    if prefix is None:
        if csv_text is not None:
            sys.stdout.write(csv_text)
        if summary_text is not None:
            sys.stdout.write(summary_text)
        sys.stderr.write(json.dumps(manifest, sort_keys=True) + "\n")
        return
    base = Path(prefix)
    base.parent.mkdir(parents=True, exist_ok=True)
    if csv_text is not None:
        name = base.with_name(base.name + ".csv")
        name.write_text(csv_text, newline="")
        outputs.append(name.name)
    if summary_text is not None:
        name = base.with_name(base.name + ".summary.json")
        name.write_text(summary_text, newline="")
        outputs.append(name.name)
    mpath = base.with_name(base.name + ".manifest.json")
    mpath.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", newline="")


def _cmd_rate(args) -> int:
    spec, digest = load_model(args.model)
    ctx = RateFunctionCtx(spec, quad_tol=args.quad_tol, root_tol=args.root_tol)
    lines = ["k,x,lambda_star"]
    curves: list = list(args.k or [])
    if args.limit or not curves:
        curves.insert(0, "limit")
    for which in curves:
        for x in args.x:
            res = legendre(ctx, which, x)
            kcell = "limit" if which == "limit" else _fmt(float(which))
            lines.append(f"{kcell},{_fmt(float(x))},{_fmt(res.value)}")
    _emit(args, None, digest, lines, None)
    return 0


def _cmd_simulate(args) -> int:
    spec, digest = load_model(args.model)
    cfg = PathConfig(
        t_max=args.t_max, seed=args.seed, noise_mode=args.noise_mode, record_steps=args.record_steps
    )
    path = simulate(spec, cfg)
    header = "t,N,S,D" if args.record_steps else "t,N,S"
    lines = [header]
    for t in range(path.t_max + 1):
        row = [str(t), str(int(path.N[t])), _fmt(float(path.S[t]))]
        if args.record_steps:
            row.append("" if t == 0 else _fmt(float(path.D[t])))
        lines.append(",".join(row))
    _emit(args, args.seed, digest, lines, None)
    return 0


def _segments_path(args, spec):
    if args.inject is not None:
        values = np.asarray(_floats(args.inject), dtype=np.float64)
        if spec.dim != 1:
            raise ModelValidationError(
                "inject_dimension", "--inject supports only 1-dimensional innovation models"
            )
        overhang = spec.ma.max_lag - spec.ma.min_lag
        t_max = len(values) - overhang
        if t_max < 1:
            raise ModelValidationError(
                "inject_length", f"injected sequence too short for the MA support (needs > {overhang})"
            )
        cfg = PathConfig(t_max=t_max, seed=args.seed or 0, noise_mode="off")
        return simulate(spec, cfg, injected_innovations=values)
    if args.seed is None or args.t_max is None:
        raise ModelValidationError(
            "path_source", "segments needs either --inject or both --seed and --t-max"
        )
    cfg = PathConfig(t_max=args.t_max, seed=args.seed, noise_mode=args.noise_mode)
    return simulate(spec, cfg)


def _cmd_segments(args) -> int:
    spec, digest = load_model(args.model)
    tset = _threshold_set(args)
    path = _segments_path(args, spec)
    horizon = args.t if args.t is not None else path.t_max
    lines = ["statistic,value,k,l"]
    rep = r_stat(path, tset, horizon)
    k, l = rep.witness if rep.witness else (None, None)
    lines.append(f"R,{_fmt(rep.value)},{_fmt(k)},{_fmt(l)}")
    if args.r is not None:
        rep = t_stat(path, tset, args.r)
        k, l = rep.witness if rep.witness else (None, None)
        lines.append(f"T,{_fmt(rep.value)},{_fmt(k)},{_fmt(l)}")
    _emit(args, args.seed, digest, lines, None)
    return 0


def _cmd_verify_strong_law(args) -> int:
    spec, digest = load_model(args.model)
    cfg = StrongLawRun(
        spec=spec,
        c_p=args.cp,
        r_grid=tuple(args.r_grid),
        t_grid=tuple(args.t_grid),
        replicates=args.replicates,
        master_seed=args.seed,
        noise_mode=args.noise_mode,
        horizon_cap=args.horizon_cap,
        initial_horizon=args.initial_horizon,
    )
    result = run_strong_law(cfg, workers=args.workers)
    checks = {}
    predicted = result.summary["predicted_rate"]
    for spec_str in args.band or []:
        r, lo, hi = [float(p) for p in spec_str.split(",")]
        med = result.summary["log_T_over_r"][str(int(r))]["median"]
        checks[f"median_band_r{int(r)}"] = {
            "lo": lo, "hi": hi, "value": med, "pass": bool(lo <= med <= hi)
        }
    if args.trend is not None:
        far, near = [int(p) for p in args.trend.split(",")]
        med_far = result.summary["log_T_over_r"][str(far)]["median"]
        med_near = result.summary["log_T_over_r"][str(near)]["median"]
        checks[f"trend_r{near}_closer_than_r{far}"] = {
            "far": abs(med_far - predicted),
            "near": abs(med_near - predicted),
            "pass": bool(abs(med_near - predicted) < abs(med_far - predicted)),
        }
    if checks:
        result.summary["checks"] = checks
    lines = ["replicate,statistic,grid,value,normalized,censored"]
    for row in result.rows:
        lines.append(
            ",".join(
                _fmt(row[c]) for c in ("replicate", "statistic", "grid", "value", "normalized", "censored")
            )
        )
    _emit(args, args.seed, digest, lines, result.summary)
    return 0


def _cmd_verify_uldp(args) -> int:
    spec, digest = load_model(args.model)
    tset = _threshold_set(args)
    cfg = UldpRun(
        spec=spec,
        k_grid=tuple(Fraction(p) for p in args.k_grid.split(",")),
        t=args.t,
        tset=tset,
        samples=args.samples,
        master_seed=args.seed,
        noise_mode=args.noise_mode,
    )
    result = run_uldp(cfg, workers=args.workers)
    checks = {"exponents_nondecreasing_in_k": {
        "pass": bool(result.summary["exponents_nondecreasing_in_k"])
    }}
    for spec_str in args.band or []:
        k_str, pct = spec_str.split(",")
        row = result.summary["per_k"][str(float(Fraction(k_str)))]
        rel = abs(row["exponent"] - row["predicted"]) / row["predicted"]
        checks[f"exponent_band_k{k_str}"] = {
            "tolerance_pct": float(pct),
            "relative_error": rel,
            "pass": bool(rel <= float(pct) / 100.0),
        }
    result.summary["checks"] = checks
    cols = ("k", "t", "samples", "successes", "p_hat", "se", "exponent",
            "exponent_is_lower_bound", "predicted")
    lines = [",".join(cols)]
    for row in result.rows:
        lines.append(",".join(_fmt(row[c]) for c in cols))
    _emit(args, args.seed, digest, lines, result.summary)
    return 0


def _cmd_plan(args) -> int:
    spec, digest = load_model(args.model)
    plan = sla_plan(spec, r_target=args.r_target, horizon=args.horizon)
    _emit(args, None, digest, None, plan)
    return 0


def _cmd_replay(args) -> int:
    manifest = json.loads(Path(args.manifest).read_text())
    sub = manifest["subcommand"]
    if sub == "replay":
        raise ModelValidationError("replay_of_replay", "manifests of replay runs are not replayable")
    config = dict(manifest["config"])
    model_path = config.get("model")
    if model_path is not None and manifest.get("input_digest") is not None:
        digest = hashlib.sha256(Path(model_path).read_bytes()).hexdigest()
        if digest != manifest["input_digest"]:
            raise ModelValidationError(
                "input_digest_mismatch",
                f"model document {model_path} no longer matches the manifest digest",
            )
    replay_args = argparse.Namespace(**config)
    replay_args.subcommand = sub
    replay_args.out = args.out
    return _DISPATCH[sub](replay_args)


_DISPATCH = {
    "rate": _cmd_rate,
    "simulate": _cmd_simulate,
    "segments": _cmd_segments,
    "verify-strong-law": _cmd_verify_strong_law,
    "verify-uldp": _cmd_verify_uldp,
    "plan": _cmd_plan,
}


def build_parser() -> _Parser:
    parser = _Parser(prog="strange-segments",
                     description="Workload rate functions and long deviant segment statistics")
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")

    def add_common(p):
        p.add_argument("--model", required=True, help="path to the model JSON document")
        p.add_argument("--out", default=None,
                       help="output prefix; writes PREFIX.csv / PREFIX.summary.json / "
                            "PREFIX.manifest.json (default: stdout)")

    p = sub.add_parser("rate", help="evaluate Fenchel-Legendre transforms of the rate curves")
    add_common(p)
    p.add_argument("--x", type=_floats, required=True, help="comma-separated x values to transform")
    p.add_argument("--k", type=_floats, default=None,
                   help="comma-separated window offsets k; omit for the limit curve only")
    p.add_argument("--limit", action="store_true",
                   help="also emit the limit curve when --k is given")
    p.add_argument("--quad-tol", type=float, default=1e-10, help="quadrature error target")
    p.add_argument("--root-tol", type=float, default=1e-12, help="Legendre root tolerance")
    p.set_defaults(func=_cmd_rate)

    p = sub.add_parser("simulate", help="simulate a workload-deviation path and write t,N,S[,D]")
    add_common(p)
    p.add_argument("--seed", type=int, required=True, help="64-bit master seed")
    p.add_argument("--t-max", type=int, required=True, help="path horizon (steps)")
    p.add_argument("--noise-mode", choices=("aggregate", "literal", "off"), default=None,
                   help="noise handling (default: aggregate when the model has noise)")
    p.add_argument("--record-steps", action="store_true", help="also emit per-step deviations D")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("segments", help="long deviant segment statistics R_t and T_r on one path")
    add_common(p)
    p.add_argument("--set", choices=("above", "below", "interval"), required=True,
                   help="threshold set kind")
    p.add_argument("--a", type=float, required=True, help="threshold (lower endpoint for interval)")
    p.add_argument("--b", type=float, default=None, help="upper endpoint (interval sets only)")
    p.add_argument("--r", type=int, default=None, help="segment length for the T statistic")
    p.add_argument("--t", type=int, default=None, help="horizon for the R statistic (default t-max)")
    p.add_argument("--inject", default=None,
                   help="comma-separated innovation values; bypasses the sampler")
    p.add_argument("--seed", type=int, default=None, help="64-bit master seed (when not injecting)")
    p.add_argument("--t-max", type=int, default=None, help="path horizon (when not injecting)")
    p.add_argument("--noise-mode", choices=("aggregate", "literal", "off"), default=None,
                   help="noise handling for seeded paths")
    p.set_defaults(func=_cmd_segments)

    p = sub.add_parser("verify-strong-law",
                       help="Monte Carlo check of the growth law for T_r and R_t")
    add_common(p)
    p.add_argument("--seed", type=int, required=True, help="64-bit master seed")
    p.add_argument("--cp", type=float, required=True, help="capacity threshold C_p (above the mean)")
    p.add_argument("--replicates", type=int, default=50, help="number of independent replicates")
    p.add_argument("--r-grid", type=_ints, default=[6, 8, 10, 12, 14],
                   help="comma-separated segment lengths r")
    p.add_argument("--t-grid", type=_ints, default=[100, 1000],
                   help="comma-separated horizons t for R_t")
    p.add_argument("--noise-mode", choices=("aggregate", "literal", "off"), default=None,
                   help="noise handling (default: aggregate when the model has noise)")
    p.add_argument("--horizon-cap", type=int, default=10_000_000,
                   help="maximum horizon for the doubling search")
    p.add_argument("--initial-horizon", type=int, default=None, help="starting horizon")
    p.add_argument("--workers", type=int, default=1, help="parallel replicate workers")
    p.add_argument("--band", action="append", default=None, metavar="R,LO,HI",
                   help="check that the median of log T_r / r lies in [LO, HI] (repeatable)")
    p.add_argument("--trend", default=None, metavar="FAR,NEAR",
                   help="check that the median at r=NEAR is closer to the prediction than at r=FAR")
    p.set_defaults(func=_cmd_verify_strong_law)

    p = sub.add_parser("verify-uldp",
                       help="Monte Carlo check of window tail exponents against the rate curves")
    add_common(p)
    p.add_argument("--seed", type=int, required=True, help="64-bit master seed")
    p.add_argument("--t", type=int, required=True, help="window length in steps")
    p.add_argument("--k-grid", default="0", help="comma-separated window offsets k")
    p.add_argument("--samples", type=int, required=True, help="window samples per offset")
    p.add_argument("--set", choices=("above", "below", "interval"), required=True,
                   help="threshold set kind")
    p.add_argument("--a", type=float, required=True, help="threshold (lower endpoint for interval)")
    p.add_argument("--b", type=float, default=None, help="upper endpoint (interval sets only)")
    p.add_argument("--noise-mode", choices=("aggregate", "off"), default=None,
                   help="noise handling (literal is unsupported for window sampling)")
    p.add_argument("--workers", type=int, default=1, help="parallel sample-chunk workers")
    p.add_argument("--band", action="append", default=None, metavar="K,PCT",
                   help="check the offset-K exponent is within PCT percent of prediction (repeatable)")
    p.set_defaults(func=_cmd_verify_uldp)

    p = sub.add_parser("plan", help="invert the growth law into a capacity headroom plan")
    add_common(p)
    p.add_argument("--r-target", type=int, required=True,
                   help="longest tolerable deviant segment length")
    p.add_argument("--horizon", type=int, required=True,
                   help="planning horizon (steps) by which the guarantee should hold")
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser("replay", help="re-run a manifest and reproduce its outputs byte-for-byte")
    p.add_argument("--manifest", required=True, help="path to a run manifest JSON")
    p.add_argument("--out", default=None, help="output prefix for the replayed run")
    p.set_defaults(func=_cmd_replay)

    return parser


def _emit_error(kind: str, exc: Exception) -> None:
    record = {"error": kind, "message": str(exc)}
    invariant = getattr(exc, "invariant", None)
    if invariant is not None:
        record["invariant"] = invariant
    sys.stderr.write(json.dumps(record, sort_keys=True) + "\n")


def main(argv=None) -> int:
    level = os.environ.get("STRANGE_SEGMENTS_LOG")
    if level:
        logging.basicConfig(level=level.upper())
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ModelValidationError as exc:
        _emit_error("validation", exc)
        return 1
    except NumericalError as exc:
        _emit_error("numerical", exc)
        return 2
    except ValueError as exc:
        _emit_error("validation", exc)
        return 1


def parse_and_dispatch(argv) -> int:
    """Dispatch an argv list; returns the process exit status."""
    return main(argv)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
