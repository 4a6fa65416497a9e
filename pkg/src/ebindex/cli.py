"""Command-line front end.

Subcommands: ``index``, ``scan-gad``, ``scan-depolarizing``, ``counterexample``,
``filter-search`` and ``verify``. Reports are JSON with sorted keys, so runs
with the same arguments are byte-identical. Scans emit CSV by default.

Exit codes: 0 success, 1 usage or input error, 2 undecided result,
3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from . import zoo
from .channels import Channel, LinearMap, as_channel, bloch_from_channel, load_map
from .exceptions import InvalidArgumentError, NotCompletelyPositiveError
from .filters import (
    choi_minor_check,
    counterexample_chain,
    general_filter_search,
    single_unitary_index_max,
    unitary_filter_search,
    werner_unitary_futility,
)
from .indices import (
    DEFAULT_CAP,
    IndexResult,
    divergence_check,
    n_depolarizing_closed,
    n_gad_closed,
    n_index,
    nu_unital_qubit,
)
from .separability import recognize_family
from .verify import check_channel, run_suite

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_UNDECIDED = 2
EXIT_VERIFY = 3

INFINITE_CODE = -1
UNDECIDED_CODE = -2

FAMILIES = ("gad", "depolarizing", "werner", "random")
SUITES = ("algebra", "eb-criteria", "indices", "filters", "protocols", "all")


class UsageError(Exception):
    """Bad arguments or unreadable input; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which collides with "undecided"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class Grid:
    lo: float
    hi: float
    steps: int

    def values(self) -> np.ndarray:
        if self.steps < 1:
            raise UsageError("grid steps must be >= 1")
        if self.hi < self.lo:
            raise UsageError("grid max must be >= grid min")
        return np.linspace(self.lo, self.hi, self.steps)


# -- helpers -----------------------------------------------------------------

def _threads() -> int:
    raw = os.environ.get("EBINDEX_THREADS", "")
    try:
        n = int(raw) if raw else (os.cpu_count() or 1)
    except ValueError:
        raise UsageError(f"EBINDEX_THREADS must be an integer, got {raw!r}")
    return max(1, n)


def _parallel_map(func: Callable, items: Sequence) -> list:
    """``map`` over a thread pool; results keep input order."""
    workers = min(_threads(), max(1, len(items)))
    if workers == 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def _code(r: IndexResult) -> int:
    if r.is_finite:
        return int(r.n)
    return INFINITE_CODE if r.is_infinite else UNDECIDED_CODE


def _num(x: float) -> str:
    return f"{float(x):.12g}"


def _require(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-").replace("lam", "lambda") for n in missing)
        raise UsageError(f"family {args.family!r} needs {flags}")


def build_channel(args) -> LinearMap:
    """Channel from ``--channel FILE`` or ``--family`` plus its parameters."""
    if getattr(args, "channel", None):
        if args.family:
            raise UsageError("give either --channel or --family, not both")
        return as_channel(load_map(args.channel))
    fam = args.family
    if fam is None:
        raise UsageError("one of --family or --channel is required")
    if fam == "gad":
        _require(args, "p", "gamma")
        return zoo.gad(args.p, args.gamma)
    if fam == "depolarizing":
        _require(args, "lam")
        return zoo.depolarizing(args.lam, args.d or 2)
    if fam == "werner":
        _require(args, "eta")
        return zoo.werner(args.eta, args.d or 3)
    return zoo.random_channel(args.d or 2, seed=args.seed)


def _family_tag(args) -> Optional[zoo.FamilyTag]:
    """Exact tag for ``--family`` input, so closed forms use the given parameters."""
    if getattr(args, "channel", None):
        return None
    if args.family == "gad":
        return zoo.GAD(args.p, args.gamma)
    if args.family == "depolarizing":
        return zoo.Depolarizing(args.lam, args.d or 2)
    if args.family == "werner":
        return zoo.Werner(args.eta, args.d or 3)
    return None


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _csv(header: List[str], rows: List[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _table(header: List[str], rows: List[list], fmt: str) -> str:
    if fmt == "csv":
        return _csv(header, rows)
    return _json([dict(zip(header, r)) for r in rows])


def _json_only(args) -> None:
    if args.format == "csv":
        raise UsageError(f"{args.command} only supports --format json")


# -- index -------------------------------------------------------------------

def _nu_section(ch: Channel, n: IndexResult, args) -> dict:
    """Unitary-filtered index: exact where a closed form applies, else a search bound."""
    if n.is_infinite:
        return {"value": "infinite", "exact": True, "method": "direct index infinite"}
    tag = recognize_family(ch)
    if isinstance(tag, zoo.Depolarizing):
        return {"value": n.n, "exact": True, "method": "depolarizing futility"}
    if ch.dim_in == 2:
        b = bloch_from_channel(ch)
        if b.is_unital:
            r = nu_unital_qubit(b)
            return {"value": _code(r) if r.is_finite else r.value, "exact": True,
                    "method": "schatten sequence", "result": r.to_dict()}
        div = divergence_check(ch)
        if div.certified:
            return {"value": "infinite", "exact": True, "method": "pure state in image"}
        single = single_unitary_index_max(ch, cap=args.cap, seed=args.seed)
        lower = max(n.n, single.n) if single.is_finite else n.n
        return {"value": lower, "exact": False, "method": "single unitary scan (lower bound)",
                "result": single.to_dict()}
    lower = _search_lower_bound(ch, n.n, "unitary", args)
    return {"value": lower["value"], "exact": False, "method": "unitary filter search (lower bound)",
            "search": lower["search"]}


def _search_lower_bound(ch: Channel, start: int, kind: str, args) -> dict:
    """Grow the chain length while the search still finds a NOT_EB chain."""
    if start <= 1:
        # a chain containing an EB factor is EB
        return {"value": 1, "search": None}
    search = unitary_filter_search if kind == "unitary" else general_filter_search
    m, rep = start, None
    while m < args.cap:
        rep = search(ch, m, args.restarts, args.seed, args.max_evals)
        if not rep.flag_not_eb:
            break
        m += 1
    return {"value": m, "search": None if rep is None else rep.to_dict()}


def cmd_index(args) -> int:
    _json_only(args)
    ch = build_channel(args)
    n = n_index(ch, args.cap)
    report = {"command": "index", "dim": ch.dim_in, "n": n.to_dict(), "n_value": _code(n)}
    tag = _family_tag(args) or recognize_family(ch)
    if tag is not None:
        report["family"] = tag.to_dict()
        if isinstance(tag, zoo.GAD):
            report["closed_form"] = n_gad_closed(tag.p, tag.gamma).to_dict()
        elif isinstance(tag, zoo.Depolarizing):
            report["closed_form"] = n_depolarizing_closed(tag.lam, tag.d).to_dict()
    if n.is_undecided:
        report["N_U"] = {"value": "undecided"}
        report["N_evidence"] = {"value": "undecided"}
        _emit(_json(report), args.out)
        return EXIT_UNDECIDED
    nu = _nu_section(ch, n, args)
    report["N_U"] = nu
    if nu["value"] == "infinite":
        report["N_evidence"] = {"value": "infinite", "note": "N >= N_U"}
    else:
        ev = _search_lower_bound(ch, int(nu["value"]), "general", args)
        report["N_evidence"] = {"value": ev["value"], "lower_bound_only": True, "search": ev["search"]}
    _emit(_json(report), args.out)
    return EXIT_OK


# -- scans -------------------------------------------------------------------

def cmd_scan_gad(args) -> int:
    gammas = Grid(args.gamma_min, args.gamma_max, args.gamma_steps).values()
    ps = Grid(args.p_min, args.p_max, args.p_steps).values()
    if min(gammas[0], ps[0]) < 0.0 or max(gammas[-1], ps[-1]) > 1.0:
        raise UsageError("GAD grid must lie inside [0, 1] x [0, 1]")
    points = [(g, p) for g in gammas for p in ps]
    codes = _parallel_map(lambda gp: _code(n_gad_closed(gp[1], gp[0])), points)
    rows = [[_num(g), _num(p), c] for (g, p), c in zip(points, codes)]
    _emit(_table(["gamma", "p", "n"], rows, args.format), args.out)
    return EXIT_OK


def cmd_scan_depolarizing(args) -> int:
    d = args.d or 2
    if d < 2:
        raise UsageError("--d must be >= 2")
    lo = -1.0 / (d * d - 1)
    lams = Grid(args.lambda_min, args.lambda_max, args.lambda_steps).values()
    if lams[0] < lo - 1e-12 or lams[-1] > 1.0:
        raise UsageError(f"lambda grid must lie inside [{lo:.6g}, 1] for d={d}")
    codes = _parallel_map(lambda x: _code(n_depolarizing_closed(x, d)), list(lams))
    rows = [[_num(x), c] for x, c in zip(lams, codes)]
    _emit(_table(["lambda", "n"], rows, args.format), args.out)
    return EXIT_OK


# -- counterexample ----------------------------------------------------------

def cmd_counterexample(args) -> int:
    _json_only(args)
    d = args.d if args.d is not None else 3
    if d < 3:
        raise UsageError("counterexample requires d ≥ 3")
    if args.k < 0:
        raise UsageError("--k must be >= 0")
    eta = 1.0 / (d - 1)
    fut = werner_unitary_futility(eta, d, samples=args.samples, seed=args.seed)
    chain = counterexample_chain(d, args.k)
    minor = choi_minor_check(chain)
    report = {
        "command": "counterexample",
        "d": d,
        "k": args.k,
        "eta": eta,
        "noise_applications": chain.chain_length,
        "N_U": 2 if fut.holds and fut.eb else "unconfirmed",
        "unitary_futility": fut.to_dict(),
        "minor": minor.to_dict(),
        "chain_verdict": minor.verdict.value,
    }
    _emit(_json(report), args.out)
    return EXIT_OK if minor.matches else EXIT_VERIFY


# -- filter search -----------------------------------------------------------

def cmd_filter_search(args) -> int:
    _json_only(args)
    ch = build_channel(args)
    if args.length < 2:
        raise UsageError("--length must be >= 2")
    search = unitary_filter_search if args.kind == "unitary" else general_filter_search
    rep = search(ch, args.length, args.restarts, args.seed, args.max_evals)
    report = {"command": "filter-search", "dim": ch.dim_in, "report": rep.to_dict()}
    _emit(_json(report), args.out)
    return EXIT_OK


# -- verify ------------------------------------------------------------------

def cmd_verify(args) -> int:
    _json_only(args)
    if args.channel:
        results = check_channel(load_map(args.channel))
        label = "channel"
    else:
        if args.suite not in SUITES:
            raise UsageError(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES)}")
        results = run_suite(args.suite, args.seed)
        label = args.suite
    failures = [r.to_dict() for r in results if not r.passed]
    report = {"command": "verify", "suite": label, "seed": args.seed, "checks": len(results),
              "passed": not failures, "failures": failures}
    _emit(_json(report), args.out)
    return EXIT_OK if not failures else EXIT_VERIFY


# -- parser ------------------------------------------------------------------

def _channel_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--family", choices=FAMILIES)
    p.add_argument("--channel", help="JSON Choi file written by save_map")
    p.add_argument("--p", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--d", type=int)


def _common(p: argparse.ArgumentParser, fmt: str = "json") -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "csv"), default=fmt)


def _search_flags(p: argparse.ArgumentParser, restarts: int, evals: int) -> None:
    p.add_argument("--cap", type=int, default=DEFAULT_CAP)
    p.add_argument("--restarts", type=int, default=restarts)
    p.add_argument("--max-evals", type=int, default=evals)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ebindex", description="Entanglement-breaking indices of quantum channels.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("index", help="direct index n, N_U and N evidence for one channel")
    _channel_flags(p)
    _search_flags(p, restarts=4, evals=400)
    _common(p)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("scan-gad", help="closed-form n over a (gamma, p) grid")
    for name in ("gamma", "p"):
        p.add_argument(f"--{name}-min", type=float, default=0.0)
        p.add_argument(f"--{name}-max", type=float, default=1.0)
        p.add_argument(f"--{name}-steps", type=int, default=101)
    _common(p, "csv")
    p.set_defaults(func=cmd_scan_gad)

    p = sub.add_parser("scan-depolarizing", help="closed-form n over a lambda grid")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--lambda-min", type=float, default=0.0)
    p.add_argument("--lambda-max", type=float, default=1.0)
    p.add_argument("--lambda-steps", type=int, default=401)
    _common(p, "csv")
    p.set_defaults(func=cmd_scan_depolarizing)

    p = sub.add_parser("counterexample", help="Werner counterexample for d >= 3")
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--samples", type=int, default=100)
    _common(p)
    p.set_defaults(func=cmd_counterexample)

    p = sub.add_parser("filter-search", help="maximise chain negativity over filters")
    _channel_flags(p)
    p.add_argument("--length", type=int, default=2, help="noise applications in the chain")
    p.add_argument("--kind", choices=("unitary", "general"), default="unitary")
    _search_flags(p, restarts=8, evals=1000)
    _common(p)
    p.set_defaults(func=cmd_filter_search)

    p = sub.add_parser("verify", help="run property suites or check a channel file")
    p.add_argument("--suite", default="all")
    p.add_argument("--channel", help="check channel invariants of a JSON Choi file")
    _common(p)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, InvalidArgumentError, NotCompletelyPositiveError) as exc:
        sys.stderr.write(f"ebindex {args.command}: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
