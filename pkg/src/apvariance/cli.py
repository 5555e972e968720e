"""Command-line entry point: ``apvariance <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import tempfile
from fractions import Fraction

import mpmath as mp

from .characters import modulus_context
from .explicit import EFParams, R_delta, S_delta_prime_side, UnverifiedZeros
from .family import CharacterFamily, select_family
from .lfunc import PrecisionError
from .pipeline import (
    ExperimentConfig,
    FamilyError,
    cross_check,
    dumps_report,
    littlewood_demo,
    mechanism_demo,
)
from .primes import CapacityError, sieve_tally
from .sync import MemoryBudgetError, SyncMiss, SyncProblem, default_floor, sync_brute, sync_lowest_in_range
from .variance import hooley_scan, variance_report
from .zeros import DEFAULT_DIGITS, SchemaError, ZeroStore, export_zeros, find_zeros, ingest_zero_table, rvm_check, verify_ingested


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


# ---------------------------------------------------------------------------


def cmd_variance(args) -> int:
    rep = variance_report(sieve_tally(args.x, args.q, args.workers), parseval_check=args.parseval_check)
    body = {
        "q": rep.q,
        "x": rep.x,
        "G": rep.G,
        "V": rep.V,
        "hooley_ratio": rep.hooley_ratio,
        "parseval_residual_G": rep.parseval_residual_G,
        "parseval_residual_V": rep.parseval_residual_V,
        "flags": rep.flags,
    }
    _emit(json.dumps(body, indent=1, sort_keys=True) + "\n", args.out)
    return 0


def cmd_hooley_scan(args) -> int:
    res = hooley_scan(range(args.q_min, args.q_max + 1), _floats(args.x_grid), args.out, args.workers)
    if not args.out:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["q", "x", "G", "V", "hooley_ratio", "flag"])
        for r in res["rows"]:
            w.writerow([r["q"], r["x"], repr(r["G"]), repr(r["V"]), repr(r["hooley_ratio"]), r["flag"]])
    return 0


def cmd_zeros(args) -> int:
    ctx = modulus_context(args.q)
    chars = [ctx.from_label(args.label)] if args.label is not None else [c for c in ctx.characters if c.is_primitive]
    if not chars:
        print(f"no primitive characters mod {args.q}", file=sys.stderr)
        return 2
    sets = []
    for chi in chars:
        zs = find_zeros(chi.primitive(), args.height, digits=args.digits, height_ceiling=max(200.0, args.height))
        chk = rvm_check(zs)
        print(f"chi={zs.character_label}: {len(zs)} zeros, status={zs.status}, RvM ok={chk['ok']}", file=sys.stderr)
        sets.append(zs)
    with tempfile.TemporaryDirectory() as tmp:
        path = args.out or os.path.join(tmp, "zeros.csv")
        export_zeros(sets, path)
        if args.verify:
            for key, zs in ingest_zero_table(path, args.height).items():
                print(f"verify {key}: {verify_ingested(zs).status}", file=sys.stderr)
        if not args.out:
            with open(path, encoding="utf-8") as fh:
                sys.stdout.write(fh.read())
    return 0


def cmd_family(args) -> int:
    fam = select_family(args.q, args.w, args.size if args.size is not None else "max")
    if args.out:
        fam.to_json(args.out)
    else:
        sys.stdout.write(json.dumps(fam.to_dict(), indent=1, sort_keys=True) + "\n")
    return 0


def cmd_explicit_formula(args) -> int:
    fam = CharacterFamily.from_json(args.family) if args.family else select_family(args.q, 1.0, "max")
    if fam.q != args.q:
        print(f"family modulus {fam.q} differs from --q {args.q}", file=sys.stderr)
        return 2
    store = ZeroStore(args.zero_store)
    params = EFParams(Fraction(args.delta), args.height, fam)
    y = Fraction(args.y)
    R = R_delta(params, y, store, kernel=args.kernel, allow_unverified=args.allow_unverified, height_ceiling=max(200.0, args.height))
    body = {
        "q": fam.q,
        "family": fam.to_dict(),
        "delta": str(params.delta),
        "T": params.T,
        "y": str(y),
        "R_normalized": R.R_normalized,
        "imag_residue": R.imag_residue,
        "prediction": R.main_term_prediction,
        "budget": R.error_budget,
        "details": R.details,
    }
    if args.prime_side:
        S = S_delta_prime_side(params, float(y))
        body["S_normalized"] = S.S_normalized
        body["prime_side_budget"] = S.error_budget
    _emit(json.dumps(body, indent=1, sort_keys=True, default=str) + "\n", args.out)
    return 0


def read_frequencies(path) -> tuple[list, int]:
    """CSV with header ``lambda,digits``; lambda as a decimal string."""
    out, digits = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["lambda", "digits"]:
            raise SchemaError(f"{path}:1: expected header lambda,digits, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 2:
                raise SchemaError(f"{path}:{lineno}: expected 2 fields")
            try:
                d = int(row[1])
                with mp.workdps(d + 10):
                    out.append(mp.mpf(row[0]))
            except ValueError as exc:
                raise SchemaError(f"{path}:{lineno}: {exc}") from None
            digits.append(d)
    return out, min(digits) if digits else 15


def cmd_synchronize(args) -> int:
    lams, digits = read_frequencies(args.frequencies)
    tol = Fraction(args.tol) if args.tol else None
    problem = SyncProblem(lams, args.M, args.N, tol=tol, digits=digits)
    body = {"k": problem.k, "M": args.M, "N": args.N, "cells": problem.cells, "count_lower_bound": problem.count_lower_bound()}
    if args.floor is not None:
        floor = default_floor(args.N) if args.floor == "auto" else int(args.floor)
        body["floor"] = floor
        body["lowest"] = sync_lowest_in_range(problem, floor)
    else:
        res = sync_brute(problem)
        body.update(hits=res.hits, method=res.method, max_fractional_error=res.max_fractional_error)
    _emit(json.dumps(body, indent=1, sort_keys=True) + "\n", args.out)
    return 0


def _config(args) -> ExperimentConfig:
    overrides = {
        k: getattr(args, k, None)
        for k in ("q", "epsilon", "C", "delta", "g", "K", "family", "sync_k", "sync_N", "y_max", "check_T", "zero_store", "digits", "out")
    }
    if args.config:
        return ExperimentConfig.from_file(args.config, **overrides)
    return ExperimentConfig(**{k: v for k, v in overrides.items() if v is not None})


def cmd_mechanism_demo(args) -> int:
    cfg = _config(args)
    try:
        report = mechanism_demo(cfg)
    except FamilyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _emit(dumps_report(report), cfg.out)
    return 0 if report.get("verdict") == "PASS" else 1


def cmd_littlewood_demo(args) -> int:
    report = littlewood_demo(args.q, args.label, args.x_ceiling, args.csv)
    _emit(dumps_report(report), args.out)
    return 0


def cmd_cross_check(args) -> int:
    report = cross_check(args.q, _floats(args.y_grid), Fraction(args.delta), args.height, ZeroStore(args.zero_store))
    _emit(dumps_report(report), args.out)
    return 0 if report["verdict"] == "PASS" else 1


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="apvariance", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("variance", help="G(x;q) and V(x;q) by sieving")
    s.add_argument("--q", type=int, required=True)
    s.add_argument("--x", type=float, required=True)
    s.add_argument("--parseval-check", action="store_true")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(func=cmd_variance)

    s = sub.add_parser("hooley-scan", help="G, V and Hooley ratios over a (q, x) grid")
    s.add_argument("--q-min", type=int, required=True)
    s.add_argument("--q-max", type=int, required=True)
    s.add_argument("--x-grid", required=True, help="comma or space separated x values")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(func=cmd_hooley_scan)

    s = sub.add_parser("zeros", help="verified zeros of primitive L-functions mod q")
    s.add_argument("--q", type=int, required=True)
    s.add_argument("--label", type=int)
    s.add_argument("--height", type=float, required=True)
    s.add_argument("--digits", type=int, default=DEFAULT_DIGITS)
    s.add_argument("--verify", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_zeros)

    s = sub.add_parser("family", help="conductor-controlled character family")
    s.add_argument("--q", type=int, required=True)
    s.add_argument("--w", type=float, required=True)
    s.add_argument("--size", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_family)

    s = sub.add_parser("explicit-formula", help="zero-side average R at one y")
    s.add_argument("--q", type=int, required=True)
    s.add_argument("--delta", required=True)
    s.add_argument("--height", type=float, required=True)
    s.add_argument("--y", required=True, help="exact decimal or fraction")
    s.add_argument("--family")
    s.add_argument("--kernel", choices=["lemma", "exact"], default="lemma")
    s.add_argument("--prime-side", action="store_true")
    s.add_argument("--allow-unverified", action="store_true")
    s.add_argument("--zero-store")
    s.add_argument("--out")
    s.set_defaults(func=cmd_explicit_formula)

    s = sub.add_parser("synchronize", help="simultaneous Diophantine alignment")
    s.add_argument("--frequencies", required=True)
    s.add_argument("--M", type=int, required=True)
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--tol", help="tolerance, default 1/M")
    s.add_argument("--floor", help="'auto' or an integer: report the lowest hit >= floor")
    s.add_argument("--out")
    s.set_defaults(func=cmd_synchronize)

    s = sub.add_parser("mechanism-demo", help="family, zeros, synchronization and R at the aligned y")
    s.add_argument("--config", help="JSON file with ExperimentConfig keys; flags override it")
    s.add_argument("--q", type=int)
    s.add_argument("--epsilon", type=float)
    s.add_argument("--C", type=float)
    s.add_argument("--delta")
    s.add_argument("--g", type=float)
    s.add_argument("--K", type=float)
    s.add_argument("--family", choices=["pipeline", "max"])
    s.add_argument("--sync-k", type=int)
    s.add_argument("--sync-N", type=int)
    s.add_argument("--y-max", type=float)
    s.add_argument("--check-T", type=float)
    s.add_argument("--digits", type=int)
    s.add_argument("--zero-store")
    s.add_argument("--out")
    s.set_defaults(func=cmd_mechanism_demo)

    s = sub.add_parser("littlewood-demo", help="min of psi(x, chi)/sqrt(x) for a fixed character")
    s.add_argument("--q", type=int, required=True)
    s.add_argument("--label", type=int, required=True)
    s.add_argument("--x-ceiling", type=float, required=True)
    s.add_argument("--csv")
    s.add_argument("--out")
    s.set_defaults(func=cmd_littlewood_demo)

    s = sub.add_parser("cross-check", help="prime side against zero side over a y grid")
    s.add_argument("--q", type=int, required=True)
    s.add_argument("--y-grid", required=True)
    s.add_argument("--delta", required=True)
    s.add_argument("--height", type=float, required=True)
    s.add_argument("--zero-store")
    s.add_argument("--out")
    s.set_defaults(func=cmd_cross_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CapacityError, SchemaError, MemoryBudgetError, UnverifiedZeros, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SyncMiss as exc:
        print(f"error: {exc}; increase N or lower the floor ({exc.details})", file=sys.stderr)
        return 3
    except PrecisionError as exc:
        print(f"error: {exc}; rerun with more digits", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
