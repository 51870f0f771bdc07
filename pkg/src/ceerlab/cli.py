"""Command-line front end: ``ceerlab run|verify|adversary|corpus|explain``."""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .harness import (ADVERSARIES, UndecidedPresent, execute, load_scenario, run_loaded,
                      with_overrides)
from .relations import PacingViolation, UnsupportedShape
from .universe import ParseError

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_SURVIVED, EXIT_DIVERGED = 0, 1, 2, 3, 4

PACKAGE_SCENARIOS = Path(__file__).parent / "scenarios"

EXPLAIN = {
    "pi02_to_eqce": ("finite relation table (chip evidence) -> set equality",
                     "for each pair a<b, column a trails column b by exactly one element "
                     "and no column outgrows column b, at every stage"),
    "set_to_e3_binary": ("column-set equality -> almost equality of columns, 2 inputs",
                         "limit verdicts of every output pair against set equality of the input columns"),
    "set_to_e3_ternary": ("column-set equality -> almost equality of columns, 3 inputs",
                          "limit verdicts of every output pair"),
    "set_to_e3_finitary": ("column-set equality -> almost equality of columns, n inputs",
                           "limit verdicts of every output pair; agreement with the binary and "
                           "ternary forms on shared fields"),
    "z0_to_e3": ("zero-density difference -> almost equality of columns",
                 "every block is an initial segment within the block-size bound; "
                 "observed block maxima are reported"),
    "min_to_max": ("equal minima -> equal maxima, any number of inputs",
                   "limit verdicts including empty-set sentinels"),
    "eqce_to_emax_ternary": ("set equality -> equal maxima, 3 inputs",
                             "outputs stay distinct initial segments; limit verdicts of all pairs"),
    "dup_columns": ("column-set equality -> column permutation equivalence",
                    "each listed column is copied the configured number of times"),
    "perm_to_set": ("column permutation equivalence -> column-set equality",
                    "column counts and guessing columns are replayable from the trace"),
    "cof_to_set": ("cofiniteness agreement -> column-set equality",
                   "the C and D column formulas, checked against fixed limits"),
    "card_max_bridge": ("equal maxima <-> equal cardinalities, one input",
                        "limit verdicts for the chosen direction"),
    "block_relation": ("set equality -> block relation, fixed arity",
                       "the tuple listing has no repetition; reductions map into one block"),
    "chain_relation": ("set equality -> chain relation, any arity",
                       "the chain walk agrees with its closed form"),
    "adv_set_not_e3": ("game against unary candidates from column-set equality to almost equality",
                       "defeat certificates re-validated; adversary reads lag by one stage"),
    "adv_max_to_min_binary": ("game against binary candidates from equal maxima to equal minima",
                              "defeat certificates re-validated; adversary reads lag by one stage"),
    "adv_no4ary_emax": ("game against 4-ary candidates from set equality to equal maxima",
                        "even numbers only in the first pair, odd only in the second; "
                        "certificates re-validated"),
    "adv_pigeonhole": ("game against (n+1)-ary candidates into the n-slot block relation",
                       "certificate pair re-decided from descriptions and the block listing"),
    "adv_finitary_slice": ("game against full reductions into the chain relation",
                           "certificate pair re-decided from descriptions and the chain listing"),
    "adv_infclasses": ("game against 4-ary candidates into a table with few hard classes",
                       "certificates re-validated from stored set histories and the table"),
}


def _resolve(path: str) -> Path:
    p = Path(path)
    if not p.exists() and (PACKAGE_SCENARIOS.parent / path).exists():
        p = PACKAGE_SCENARIOS.parent / path
    if not p.exists():
        raise FileNotFoundError(path)
    return p


def _load(args):
    sc = load_scenario(_resolve(args.scenario))
    return with_overrides(sc, args.horizon, args.window, getattr(args, "seed", None))


def _verdict_code(report) -> int:
    name = type(report.verdict).__name__
    if name == "Defeated":
        return EXIT_PASS if report.passed else EXIT_FAIL
    if name == "Survived":
        return EXIT_SURVIVED
    return EXIT_DIVERGED


def _certificate_summary(cert: dict) -> dict:
    def side(w):
        if w["kind"] == "events":
            text = json.dumps(w["events"], separators=(",", ":"))
            return {"kind": "events", "count": len(w["events"]),
                    "sha256": hashlib.sha256(text.encode()).hexdigest()[:16]}
        if w["kind"] == "family" and "hits" in w:
            return {"kind": "family", "family": w["family"],
                    "columns_hit": len(w["hits"])}
        return w
    out = dict(cert)
    wit = dict(cert["witnesses"])
    for part in ("lhs", "rhs"):
        p = dict(wit[part])
        p["left"], p["right"] = side(p["left"]), side(p["right"])
        wit[part] = p
    out["witnesses"] = wit
    return out


def cmd_run(args) -> int:
    sc = _load(args)
    report, trace = run_loaded(sc, args.trace, getattr(args, "candidate", None))
    print(report.table())
    print(f"runtime {report.runtime:.2f}s", file=sys.stderr)
    if report.verdict is not None:
        return _verdict_code(report)
    return EXIT_PASS if report.passed else EXIT_FAIL


def cmd_verify(args) -> int:
    sc = _load(args)
    if sc.construction is None:
        raise ParseError("verify takes construction scenarios; use 'adversary' for games")
    report, trace = execute(sc)
    if args.trace:
        trace.write(args.trace)
    print(report.table())
    if report.undecided:
        print(f"undecided pairs: {[list(r.pair) for r in report.undecided]} (raise --horizon)")
    print(f"runtime {report.runtime:.2f}s", file=sys.stderr)
    return EXIT_PASS if report.passed else EXIT_FAIL


def cmd_adversary(args) -> int:
    sc = _load(args)
    if sc.adversary is None:
        raise ParseError("adversary takes game scenarios; use 'run' for constructions")
    report, trace = run_loaded(sc, args.trace, args.candidate)
    print(report.table())
    cert = getattr(report.verdict, "certificate", None)
    if cert is not None:
        full = cert.to_dict()
        if args.certificate:
            Path(args.certificate).write_text(json.dumps(full, indent=1, sort_keys=True))
        print("certificate:")
        print(json.dumps(_certificate_summary(full), indent=1, sort_keys=True))
        print(f"certificate validated: {'yes' if report.extra.get('validated') else 'NO'}")
    print(f"runtime {report.runtime:.2f}s", file=sys.stderr)
    return _verdict_code(report)


def _corpus_one(path: str):
    try:
        sc = load_scenario(path)
        report, _ = run_loaded(sc)
    except (ParseError, UnsupportedShape, PacingViolation, ValueError) as exc:
        return Path(path).stem, "error", False, str(exc), 0.0
    ok = report.passed if sc.expect == "pass" else not report.passed
    kind = sc.construction or sc.adversary
    if report.verdict is not None:
        detail = type(report.verdict).__name__
    else:
        detail = f"{len(report.rows)} pairs, {len(report.mismatches)} mismatched, {len(report.undecided)} undecided"
    return sc.name, kind, ok, detail, report.runtime


def cmd_corpus(args) -> int:
    root = Path(args.dir) if args.dir else PACKAGE_SCENARIOS
    if not root.is_dir():
        print(f"not a directory: {root}", file=sys.stderr)
        return EXIT_USAGE
    paths = sorted(str(p) for p in root.glob("*.json"))
    if not paths:
        print(f"no scenarios in {root}", file=sys.stderr)
        return EXIT_USAGE
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_corpus_one, paths))
    else:
        rows = [_corpus_one(p) for p in paths]
    width = max(len(r[0]) for r in rows) + 2
    for name, kind, ok, detail, runtime in rows:
        print(f"{name:<{width}}{kind:<24}{'pass' if ok else 'FAIL':<6}{detail}")
        print(f"{name:<{width}}{runtime:8.2f}s", file=sys.stderr)
    failed = [r[0] for r in rows if not r[2]]
    print(f"{len(rows) - len(failed)}/{len(rows)} scenarios pass")
    if failed:
        print("failed: " + ", ".join(failed))
        return EXIT_FAIL
    return EXIT_PASS


def cmd_explain(args) -> int:
    entry = EXPLAIN.get(args.name)
    if entry is None:
        print(f"unknown construction {args.name!r}; choose from {', '.join(sorted(EXPLAIN))}",
              file=sys.stderr)
        return EXIT_USAGE
    kind = "adversary" if args.name in ADVERSARIES else "construction"
    print(f"{args.name} ({kind})")
    print(f"  maps:   {entry[0]}")
    print(f"  checks: {entry[1]}")
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ceerlab", description=__doc__)
    sub = ap.add_subparsers(dest="verb", required=True)

    def positive(text):
        v = int(text)
        if v < 1:
            raise argparse.ArgumentTypeError("must be a positive integer")
        return v

    def common(p, seed=True):
        p.add_argument("scenario")
        p.add_argument("--horizon", type=positive)
        p.add_argument("--window", type=positive)
        p.add_argument("--trace", metavar="PATH")
        if seed:
            p.add_argument("--seed", type=int)

    p = sub.add_parser("run", help="run a scenario and report")
    common(p)
    p.add_argument("--candidate", metavar="SELECTOR")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("verify", help="verify a construction against ground truth")
    common(p)
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("adversary", help="play a game against a candidate")
    common(p)
    p.add_argument("--candidate", metavar="SELECTOR", help="builtin:<name> or table:<file>")
    p.add_argument("--certificate", metavar="PATH", help="write the full certificate here")
    p.set_defaults(func=cmd_adversary)
    p = sub.add_parser("corpus", help="run every scenario in a directory")
    p.add_argument("dir", nargs="?")
    p.add_argument("--jobs", type=positive, default=1)
    p.set_defaults(func=cmd_corpus)
    p = sub.add_parser("explain", help="describe a construction or game")
    p.add_argument("name")
    p.set_defaults(func=cmd_explain)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return EXIT_USAGE
    except UndecidedPresent as exc:
        print(exc.report.table())
        return EXIT_FAIL
    except (ParseError, UnsupportedShape, PacingViolation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

