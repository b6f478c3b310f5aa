"""Command-line entry points.

Exit codes: 0 success, 1 parse error, 2 degeneracy after retries, 3 usage,
4 symmetry rejected.  Machine-format output is byte-identical for identical
(files, flags, seed).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .metrics import measure_metrics
from .model import ModelError, parse_model
from .modular import (DegenerateModelError, compute_bounds, is_prime,
                      probability_bound, prop6_height, select_prime)
from .observability import (RunConfig, report_to_json, report_to_text,
                            run_test)
from .symmetry import parse_group, verify_symmetry

__all__ = ["main"]

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_DEGENERATE = 2
EXIT_USAGE = 3
EXIT_REJECTED = 4


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); route to exit code 3
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="obsid", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("model", help="model file")
        p.add_argument("--mu", type=int, default=3000,
                       help="confidence integer (default 3000)")
        p.add_argument("--seed", type=int, default=None,
                       help="RNG seed; default OS entropy, echoed in output")
        p.add_argument("--prime", type=int, default=None,
                       help="override the working prime (voids the guarantee)")
        p.add_argument("--force", action="store_true",
                       help="accept a prime override below the guarantee threshold")
        p.add_argument("--format", choices=("text", "json"), default="text")

    check = sub.add_parser("check", help="run the observability test")
    common(check)
    check.add_argument("--assume-known", default="",
                       help="comma-separated symbols adjoined to the base field")

    bounds = sub.add_parser("bounds", help="print model metrics and bounds")
    common(bounds)

    verify = sub.add_parser("verify-symmetry", help="verify a symmetry group file")
    common(verify)
    verify.add_argument("group", help="group file")
    verify.add_argument("--trials", type=int, default=20)
    return parser


def _load_model(path_text: str):
    path = Path(path_text)
    if not path.is_file():
        raise _UsageError(f"no such file: {path}")
    return parse_model(path.read_text(encoding="utf-8"), name=path.stem)


def _cmd_check(args) -> int:
    model = _load_model(args.model)
    assume = tuple(s for s in args.assume_known.split(",") if s)
    if args.mu < 2:
        raise _UsageError("--mu must be at least 2")
    if args.prime is not None:
        print("WARNING: prime override in effect; the probability guarantee "
              "does not apply", file=sys.stderr)
    config = RunConfig(mu=args.mu, seed=args.seed, prime=args.prime,
                       force_prime=args.force, assume_known=assume)
    report = run_test(model, config)
    if args.format == "json":
        print(report_to_json(report))
    else:
        print(report_to_text(report))
    return EXIT_OK


def _cmd_bounds(args) -> int:
    model = _load_model(args.model)
    if args.mu < 2:
        raise _UsageError("--mu must be at least 2")
    metrics = measure_metrics(model)
    bounds = compute_bounds(metrics, args.mu)
    ctx = select_prime(bounds, min_exclusive=model.n + model.ell + 2)
    d6, hc = prop6_height(metrics, model.n + model.ell, args.mu)
    prob = probability_bound(args.mu)
    if args.format == "json":
        import json
        print(json.dumps({
            "model": model.name, "n": metrics.n, "ell": metrics.ell,
            "r": metrics.r, "m": metrics.m, "d": metrics.d, "h": metrics.h,
            "L": metrics.L, "D": bounds.D, "Dprime": bounds.Dprime,
            "p": ctx.p, "mu": args.mu,
            "probability_bound": f"{float(prob):.10f}",
            "prop6_D": d6, "prop6_height": hc,
        }, sort_keys=True, separators=(",", ":")))
    else:
        print(f"model: {model.name}")
        print(f"  n={metrics.n} ell={metrics.ell} r={metrics.r} m={metrics.m}")
        print(f"  d={metrics.d} h={metrics.h:.6f} L={metrics.L}")
        print(f"  D  = {bounds.D}")
        print(f"  D' = {bounds.Dprime}")
        print(f"  p  = {ctx.p}   (threshold 2*D'*mu = {2 * bounds.Dprime * args.mu})")
        print(f"  probability bound at mu={args.mu}: {float(prob):.10f}")
        print(f"  sharper diagnostic pair: D={d6}, height={hc}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    model = _load_model(args.model)
    group_path = Path(args.group)
    if not group_path.is_file():
        raise _UsageError(f"no such file: {group_path}")
    action = parse_group(group_path.read_text(encoding="utf-8"), model)
    if args.mu < 2:
        raise _UsageError("--mu must be at least 2")
    if args.prime is not None:
        if not is_prime(args.prime):
            raise _UsageError(f"--prime {args.prime} is not prime")
        from .modular import FieldCtx
        ctx = FieldCtx(p=args.prime)
        print("WARNING: prime override in effect", file=sys.stderr)
    else:
        bounds = compute_bounds(measure_metrics(model), args.mu)
        ctx = select_prime(bounds, min_exclusive=model.n + model.ell + 2)
    seed = args.seed
    if seed is None:
        import os
        seed = int.from_bytes(os.urandom(8), "big")
    verdict = verify_symmetry(model, action, ctx, trials=args.trials, seed=seed)
    if args.format == "json":
        import json
        payload = {"model": model.name, "accepted": verdict.accepted,
                   "trials": verdict.trials, "p": ctx.p, "seed": seed,
                   "witness": verdict.witness}
        print(json.dumps(payload, sort_keys=True, separators=(",", ":")))
    else:
        print(f"model: {model.name}   p = {ctx.p}   seed = {seed}")
        if verdict.accepted:
            print(f"  accepted after {verdict.trials} trials")
        else:
            print(f"  REJECTED at trial {verdict.trials}")
            print(f"  witness equation: {verdict.witness['equation']}")
            print(f"  witness point: {verdict.witness['point']}")
    return EXIT_OK if verdict.accepted else EXIT_REJECTED


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "check":
            return _cmd_check(args)
        if args.command == "bounds":
            return _cmd_bounds(args)
        return _cmd_verify(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ModelError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except DegenerateModelError as exc:
        print(f"degenerate: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
