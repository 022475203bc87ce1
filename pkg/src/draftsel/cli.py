"""Command-line entry point: ``draftsel <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from collections import Counter
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import lp, theory, verify
from .prob import IngestError, TokenDist, effective_alphabet_size, load_records
from .selection import SingleDraft, SpecInfer, SpecTr, TwoStepIS, identical
from .sim import ConfigError, SimConfig, run_block_sim

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _num(x: float) -> str:
    return f"{x:.12g}"


def parse_vector(text: str) -> TokenDist:
    """Comma-separated probabilities; fractions such as ``1/3`` are allowed."""
    try:
        if text.strip().startswith("["):
            vals = [float(v) for v in json.loads(text)]
        else:
            vals = [float(Fraction(v.strip())) for v in text.split(",") if v.strip()]
        return TokenDist(vals)
    except (ValueError, ZeroDivisionError, json.JSONDecodeError) as e:
        raise UsageError(f"bad probability vector {text!r}: {e}") from None


def default_seed() -> int:
    raw = os.environ.get("DRAFTSEL_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"DRAFTSEL_SEED is not an integer: {raw!r}") from None


def _seed_arg(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _table(rows: list[dict], columns: list[str], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(rows, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_num(r[c]) if isinstance(r[c], float) else r[c] for c in columns])
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# -- accept-prob --------------------------------------------------------------


def _instances(args) -> list[tuple[list[TokenDist], TokenDist]]:
    if args.input:
        try:
            records = load_records(args.input)
        except OSError as e:
            raise UsageError(str(e)) from None
        return [([r["p"]] * args.k if "p" in r else [r["p1"], r["p2"]], r["q"]) for r in records]
    if args.q is None or (args.p is None and not args.draft):
        raise UsageError("give --input, or --q with --p (or repeated --draft for distinct drafts)")
    drafts = [parse_vector(v) for v in args.draft] if args.draft else [parse_vector(args.p)] * args.k
    return [(drafts, parse_vector(args.q))]


SCHEMES = ("single", "specinfer", "spectr", "is-lp", "is-truncated", "is-fast")


def _scheme(name: str, s: int | None):
    if name == "single":
        return SingleDraft()
    if name == "specinfer":
        return SpecInfer()
    if name == "spectr":
        return SpecTr()
    if name == "is-lp":
        return TwoStepIS("lp")
    if s is None:
        raise UsageError(f"scheme {name} needs --s")
    return TwoStepIS("truncated" if name == "is-truncated" else "fast", s=s)


def cmd_accept_prob(args) -> int:
    names = args.schemes.split(",") if args.schemes else [n for n in SCHEMES if args.s is not None or
                                                            n not in ("is-truncated", "is-fast")]
    bad = [n for n in names if n not in SCHEMES]
    if bad:
        raise UsageError(f"unknown schemes {bad}; choose from {','.join(SCHEMES)}")
    rows = []
    for rec, (drafts, q) in enumerate(_instances(args)):
        if any(d.n != q.n for d in drafts):
            raise UsageError(f"record {rec}: drafts and target differ in size")
        best = lp.optimal_accept_prob(drafts, q)
        tol = lp.ONE_TOL if args.tol is None else args.tol
        same = identical(drafts)
        for name in names:
            if name == "spectr" and not same:
                continue
            if name == "is-fast" and (not same or len(drafts) != 2):
                continue
            if name == "is-truncated" and len(drafts) != 2:
                continue
            s = None if args.s is None else min(args.s, q.n)
            value = _scheme(name, s).bind(drafts, q).accept_prob()
            rows.append({"record": rec, "K": len(drafts), "scheme": name, "accept_prob": value,
                         "optimal": int(abs(value - best) <= tol)})
        if same and len(drafts) == 2 and q.n <= theory.MAX_N:
            value = theory.thm3_accept_prob(drafts[0], q)[0]
            rows.append({"record": rec, "K": 2, "scheme": "formula", "accept_prob": value,
                         "optimal": int(abs(value - best) <= tol)})
        rows.append({"record": rec, "K": len(drafts), "scheme": "optimum", "accept_prob": best, "optimal": 1})
    _emit(_table(rows, ["record", "K", "scheme", "accept_prob", "optimal"], args.format), args.out)
    return EXIT_OK


# -- sweep ------------------------------------------------------------------------

FAMILIES = {"fig2-left": 1 / 3, "fig2-right": 1 / 6}


def sweep_rows(p, q1: float, points: int, K: int = 2) -> list[dict]:
    """Acceptance curves along ``q = (q1, q2, 1 - q1 - q2)`` for ``q2`` on an even grid."""
    p = TokenDist(p)
    rows = []
    for q2 in np.linspace(0.0, 1.0 - q1, points):
        q = TokenDist([q1, q2, max(0.0, 1.0 - q1 - q2)])
        rows.append({
            "q2": float(q2),
            "optimal": lp.optimal_accept_prob(p, q, K),
            "spectr": SpecTr().bind([p] * K, q).accept_prob(),
            "specinfer": SpecInfer().bind([p] * K, q).accept_prob(),
            "thm2_holds": int(theory.conjecture_condition_k(p, q, K)),
        })
    return rows


def cmd_sweep(args) -> int:
    if args.points < 2:
        raise UsageError("--points must be at least 2")
    if args.family == "custom":
        if args.p is None or args.q1 is None:
            raise UsageError("custom sweeps need --p (three entries) and --q1")
        p, q1 = parse_vector(args.p), args.q1
        if p.n != 3 or not 0.0 <= q1 <= 1.0:
            raise UsageError("custom sweeps need a three-token --p and --q1 in [0, 1]")
    else:
        p, q1 = TokenDist([1 / 3] * 3), FAMILIES[args.family]
    rows = sweep_rows(p, q1, args.points, args.k)
    _emit(_table(rows, ["q2", "optimal", "spectr", "specinfer", "thm2_holds"], args.format), args.out)
    return EXIT_OK


# -- verify -----------------------------------------------------------------------


def cmd_verify(args) -> int:
    with verify.tolerances(args.tol, args.validity_tol):
        results = verify.run_suites(args.suite, args.count, args.seed)
    text = verify.report_json(results) if args.format == "json" else verify.report_text(results)
    _emit(text, args.out)
    return EXIT_OK if all(r.passed for r in results if r.gating) else EXIT_FAIL


# -- simulate ---------------------------------------------------------------------


def cmd_simulate(args) -> int:
    try:
        # precedence: --seed, then the config's seed, then $DRAFTSEL_SEED
        cfg = SimConfig.load(args.config, default_seed=default_seed())
    except OSError as e:
        raise UsageError(str(e)) from None
    if args.seed is not None:
        cfg.seed = args.seed
    if args.blocks is not None:
        cfg.blocks = args.blocks
    stats = run_block_sim(cfg)
    if args.out:
        Path(args.out).write_text(stats.to_json() if args.format == "json" else stats.to_csv())
    print(stats.summary())
    return EXIT_OK


# -- weights ----------------------------------------------------------------------


def weights_report(p, q, s: int | None = None) -> dict:
    """Solved truncated weights, the fixed heuristic block, and the resulting selection law."""
    p, q = TokenDist(p), TokenDist(q)
    s = q.n if s is None else s
    if not 1 <= s <= q.n:
        raise UsageError(f"--s must lie in 1..{q.n}")
    problem, fixed = lp.build_truncated_w_lp(p, q, s)
    sol = lp._checked(problem)
    w = lp.weights_from_solution(problem, sol)
    pI = w.selected_dist(p)
    return {
        "s": s,
        "order": [int(t) for t in lp.truncation_order(p, q)],
        "omega1": problem.meta["omega1"],
        "free": [[i, j, float(w[i, j])] for i, j in problem.meta["pairs"]],
        "fixed": [[i, j, v] for (i, j), v in sorted(fixed.items())],
        "weights": w.matrix.tolist(),
        "selected_dist": pI.probs.tolist(),
        "accept_prob": float(np.minimum(pI.probs, q.probs).sum()),
        "lp_objective": sol.objective,
    }


def cmd_weights(args) -> int:
    if args.p is None or args.q is None:
        raise UsageError("weights needs --p and --q")
    p, q = parse_vector(args.p), parse_vector(args.q)
    if p.n != q.n:
        raise UsageError("--p and --q differ in size")
    rep = weights_report(p, q, args.s)
    if args.dump_lp:
        Path(args.dump_lp).write_text(lp.build_truncated_w_lp(p, q, rep["s"])[0].to_text())
    _emit(json.dumps(rep, indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK


# -- ingest-stats -----------------------------------------------------------------


def cmd_ingest_stats(args) -> int:
    if not 0.0 < args.top_p <= 1.0:
        raise UsageError("--top-p must lie in (0, 1]")
    try:
        records = load_records(args.path)
    except OSError as e:
        raise UsageError(str(e)) from None
    sizes = []
    for i, r in enumerate(records):
        entry = {"record": i}
        for key, d in sorted(r.items()):
            entry[key] = effective_alphabet_size(d, args.top_p)
        sizes.append(entry)
    hist = Counter(e["q"] for e in sizes)
    if args.format == "json":
        text = json.dumps({"top_p": args.top_p, "records": sizes,
                           "histogram": {str(k): v for k, v in sorted(hist.items())}}, indent=2, sort_keys=True) + "\n"
    else:
        text = _table([{"size": k, "count": v} for k, v in sorted(hist.items())], ["size", "count"], "csv")
    _emit(text, args.out)
    return EXIT_OK


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed_arg, default=None, help="u64 seed (default: $DRAFTSEL_SEED or 0)")
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--tol", type=float, help=f"agreement tolerance (default {verify.LP_TOL:g})")
    common.add_argument("--validity-tol", type=float, help=f"output-law tolerance (default {verify.VALIDITY_TOL:g})")

    ap = _Parser(prog="draftsel", description="Multi-draft token selection: acceptance, LPs, verification, simulation.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("accept-prob", parents=[common], help="acceptance probability per scheme")
    a.add_argument("--p", help="draft distribution shared by all K drafts")
    a.add_argument("--draft", action="append", default=[], help="repeat once per draft for distinct drafts")
    a.add_argument("--q", help="target distribution")
    a.add_argument("--input", help="JSON file of {p,q} or {p1,p2,q} records")
    a.add_argument("--k", type=int, default=2, help="number of drafts")
    a.add_argument("--s", type=int, help="truncation size for the truncated schemes")
    a.add_argument("--schemes", help=f"comma list from {','.join(SCHEMES)}")
    a.set_defaults(func=cmd_accept_prob)

    s = sub.add_parser("sweep", parents=[common], help="acceptance curves over a one-parameter target family")
    s.add_argument("family", choices=("fig2-left", "fig2-right", "custom"))
    s.add_argument("--points", type=int, default=101, help="grid resolution")
    s.add_argument("--k", type=int, default=2)
    s.add_argument("--p", help="custom family draft (three tokens)")
    s.add_argument("--q1", type=float, help="custom family first target entry")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", parents=[common], help="run seeded verification suites")
    v.add_argument("suite", nargs="+", choices=list(verify.SUITES) + ["all"])
    v.add_argument("--count", type=int, help="instances per suite (default: per-suite)")
    v.set_defaults(func=cmd_verify)

    m = sub.add_parser("simulate", parents=[common], help="Monte Carlo block efficiency from a JSON config")
    m.add_argument("config")
    m.add_argument("--blocks", type=int)
    m.set_defaults(func=cmd_simulate)

    w = sub.add_parser("weights", parents=[common], help="truncated LP weights for two identical drafts")
    w.add_argument("--p")
    w.add_argument("--q")
    w.add_argument("--s", type=int)
    w.add_argument("--dump-lp", help="write the LP in text form to this path")
    w.set_defaults(func=cmd_weights)

    g = sub.add_parser("ingest-stats", parents=[common], help="effective alphabet sizes of a distribution dump")
    g.add_argument("path")
    g.add_argument("--top-p", type=float, default=0.95)
    g.set_defaults(func=cmd_ingest_stats)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        if args.command != "simulate" and args.seed is None:
            args.seed = default_seed()
        return args.func(args)
    except UsageError as e:
        print(f"draftsel: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (IngestError, ConfigError) as e:
        print(f"draftsel: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
