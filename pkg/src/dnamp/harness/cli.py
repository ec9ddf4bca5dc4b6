"""Command line entry point: ``dnamp amp|check|eval``."""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from ..amplitudes import content_hash, write_cache
from ..exactalg import ExactAlgError, PoleError, evaluate
from ..kinspace import build_space, sample_point
from . import suites
from .report import CheckReport, merge

CHECKS = ("annihilate", "commutators", "residues", "vanishing", "golden", "structure", "derivations")


def _theories(arg: str) -> tuple[str, ...]:
    return suites.THEORIES if arg == "all" else (arg.upper(),)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dnamp", description="Exact checks for dimension-neutral tree amplitudes.")
    sub = p.add_subparsers(dest="command", required=True)

    fmt = argparse.ArgumentParser(add_help=False)
    fmt.add_argument("--format", choices=("text", "json"), default="text")

    a = sub.add_parser("amp", parents=[fmt], help="compute and print an amplitude")
    a.add_argument("--theory", choices=("ym", "gr"), required=True)
    a.add_argument("--n", type=int, required=True)
    a.add_argument("--cache", action="store_true", help="also write the amplitude to the cache directory")

    c = sub.add_parser("check", parents=[fmt], help="run a verification suite")
    c.add_argument("suite", choices=CHECKS)
    c.add_argument("--theory", choices=("ym", "gr", "all"), default="all")
    c.add_argument("--n", type=int, action="append", help="number of legs (repeatable)")
    c.add_argument("--ops", default=",".join(suites.ANNIHILATORS), help="annihilators to apply, e.g. X,Y,C")
    c.add_argument("--leg", action="append", type=int, help="restrict annihilators to these legs")

    e = sub.add_parser("eval", parents=[fmt], help="evaluate an expression at a seeded point")
    e.add_argument("expr", nargs="?", help="expression in k[i,j], c[i,j], e[i,j]")
    e.add_argument("--n", type=int, required=True)
    e.add_argument("--seed", type=int, default=42)
    e.add_argument("--amp", choices=("ym", "gr"), help="evaluate this theory's amplitude instead")
    return p


def _default_ns(suite: str) -> list[int]:
    return {
        "annihilate": [3, 4],
        "commutators": [3, 4],
        "residues": [4],
        "vanishing": [4],
        "golden": [4],
        "structure": [4, 5],
        "derivations": [3, 4, 5],
    }[suite]


def run_check(args) -> CheckReport:
    ns = args.n or _default_ns(args.suite)
    reports = []
    for n in ns:
        if args.suite == "annihilate":
            ops = tuple(o.strip() for o in args.ops.split(",") if o.strip())
            unknown = set(ops) - set(suites.ANNIHILATORS)
            if unknown:
                raise SystemExit(_usage(f"unknown operators {sorted(unknown)}"))
            for th in _theories(args.theory):
                reports.append(suites.suite_annihilation(th, n, ops, args.leg))
        elif args.suite == "commutators":
            for th in _theories(args.theory):
                reports.append(suites.suite_commutators(n, th))
        elif args.suite == "residues":
            for th in _theories(args.theory):
                reports.append(suites.suite_residues(th, n))
        elif args.suite == "vanishing":
            reports.append(suites.suite_vanishing_instance())
        elif args.suite == "golden":
            reports.append(suites.suite_golden(n, _theories(args.theory)))
        elif args.suite == "structure":
            reports.append(suites.suite_structure(n))
        else:
            reports.append(suites.suite_derivations(n))
    return reports[0] if len(reports) == 1 else merge(args.suite, reports)


def _usage(msg: str) -> int:
    print(f"dnamp: error: {msg}", file=sys.stderr)
    return 2


def _cmd_amp(args) -> int:
    amp = suites.cached_amplitude(args.theory, args.n, use_cache=False)
    body = amp.serialize()
    if args.cache:
        write_cache(amp)
    if args.format == "json":
        print(json.dumps({
            "theory": amp.theory,
            "n": amp.n,
            "order": [str(x) for x in amp.order],
            "normalization": str(amp.normalization),
            "sha256": content_hash(body),
            "value": body,
        }, indent=2, sort_keys=True))
    else:
        print(body)
    return 0


def _cmd_eval(args) -> int:
    sp = build_space(args.n)
    if args.amp:
        f = suites.cached_amplitude(args.amp, args.n).value
    elif args.expr:
        f = sp.parse(args.expr)
    else:
        return _usage("eval needs an expression or --amp")
    point = sample_point(sp, args.seed)
    value = evaluate(f, point)
    if args.format == "json":
        print(json.dumps({"n": args.n, "seed": args.seed, "value": str(Fraction(value))}, sort_keys=True))
    else:
        print(Fraction(value))
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    try:
        if args.command == "amp":
            return _cmd_amp(args)
        if args.command == "eval":
            return _cmd_eval(args)
        report = run_check(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ValueError, ExactAlgError, PoleError) as exc:
        return _usage(str(exc))
    print(report.to_json() if args.format == "json" else report.to_text())
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
