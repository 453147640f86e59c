"""Command-line front end: verification suites, expansions and data display.

Every command that runs checks prints a table and can write a JSON manifest.
Exit status: 0 all checks passed, 1 some check failed, 2 usage error,
3 a time or memory budget was exceeded (the partial manifest is kept).
"""

from __future__ import annotations

import argparse
import contextlib
import fcntl
import hashlib
import json
import os
import sys
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from . import __version__, checks, lax, poisson, wdvv
from .algebra import Expr
from .budget import Budget
from .diffop import LocalOperator
from .geometry import MetricCandidate, curvature
from .jet import is_trivial_density, quasi_degree
from .poisson import Verdict, run_check

SCHEMA = "wdvvkit.manifest"
SCHEMA_VERSION = 1

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3

DEFAULT_MEM_GB = 2.0
DEFAULT_SECONDS = 600.0


class UsageError(Exception):
    pass


# -- rendering ---------------------------------------------------------------


def _cell(x) -> str:
    if isinstance(x, Expr):
        return x.to_infix()
    if isinstance(x, Fraction):
        return str(x)
    return str(x)


def render_matrix(rows) -> str:
    cells = [[_cell(x) for x in row] for row in rows]
    width = max((len(c) for row in cells for c in row), default=1)
    return "\n".join("[ " + "  ".join(c.rjust(width) for c in row) + " ]" for row in cells)


def render(obj) -> str:
    if isinstance(obj, MetricCandidate):
        kind = "contravariant" if obj.contravariant else "covariant"
        return f"# {kind} metric in {obj.family}[{obj.first}..{obj.first + obj.n - 1}]\n" + render_matrix(obj.entries)
    if isinstance(obj, LocalOperator):
        lines = [f"# operator on {obj.family}[{obj.first}..{obj.first + obj.n - 1}], order {obj.order}"]
        for k in range(obj.order, -1, -1):
            c = obj.coefficient(k)
            if any(not e.is_zero() for row in c for e in row):
                lines.append(f"D^{k}:")
                lines.append(render_matrix(c))
        return "\n".join(lines)
    if isinstance(obj, wdvv.HydroSystem):
        lines = [f"# conservative system, flow {obj.label}: {obj.family}^i_{obj.label} = (v^i)_x"]
        lines += [f"v^{obj.first + i} = {v.to_infix()}" for i, v in enumerate(obj.fluxes)]
        return "\n".join(lines)
    if isinstance(obj, (list, tuple)) and obj and isinstance(obj[0], (list, tuple)):
        return render_matrix(obj)
    if isinstance(obj, Expr):
        return obj.to_infix()
    return str(obj)


def render_table(verdicts: Sequence[Verdict]) -> str:
    head = ("check", "result", "seconds", "terms", "reference")
    rows = [
        (
            v.check,
            "BUDGET" if v.budget_exceeded else ("PASS" if v.result else "FAIL"),
            f"{v.elapsed:.3f}",
            str(v.peak_terms),
            v.subject + (f" [{v.detail}]" if v.detail else ""),
        )
        for v in verdicts
    ]
    widths = [max(len(r[i]) for r in rows + [head]) for i in range(4)]
    out = ["  ".join(h.ljust(w) for h, w in zip(head[:4], widths)) + "  " + head[4]]
    for r in rows:
        out.append("  ".join(c.ljust(w) for c, w in zip(r[:4], widths)) + "  " + r[4])
    return "\n".join(out)


# -- manifest and cache -----------------------------------------------------------


def manifest(command: Sequence[str], verdicts: Sequence[Verdict]) -> dict:
    if any(v.budget_exceeded for v in verdicts):
        status = "budget-exceeded"
    else:
        status = "pass" if all(v.result for v in verdicts) else "fail"
    return {
        "schema": SCHEMA,
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "command": list(command),
        "checks": [
            {
                "id": v.check,
                "reference": v.subject,
                "verdict": "budget-exceeded" if v.budget_exceeded else ("pass" if v.result else "fail"),
                "elapsed": v.elapsed,
                "peak_terms": v.peak_terms,
                "detail": v.detail,
            }
            for v in verdicts
        ],
        "status": status,
    }


def dump(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def exit_code(doc: dict) -> int:
    return {"pass": EXIT_OK, "fail": EXIT_FAIL, "budget-exceeded": EXIT_BUDGET}[doc["status"]]


def resolve_cache_dir(flag: str | None) -> Path | None:
    d = flag or os.environ.get(lax.CACHE_ENV)
    if not d:
        return None
    os.environ[lax.CACHE_ENV] = d  # the expansion cache reads the same variable
    p = Path(d)
    p.mkdir(parents=True, exist_ok=True)
    return p


@contextlib.contextmanager
def cache_lock(cache: Path | None):
    if cache is None:
        yield
        return
    with open(cache / ".lock", "w") as fh:
        fcntl.flock(fh, fcntl.LOCK_EX)
        try:
            yield
        finally:
            fcntl.flock(fh, fcntl.LOCK_UN)


def _key(command: Sequence[str]) -> str:
    blob = json.dumps({"v": __version__, "schema": SCHEMA_VERSION, "cmd": list(command)})
    return hashlib.sha256(blob.encode()).hexdigest()[:24]


def _verdict_path(cache: Path, command: Sequence[str]) -> Path:
    return cache / "verdicts" / f"{_key(command)}.json"


# -- commands -----------------------------------------------------------------


def _budget(args, heavy: bool) -> Budget | None:
    if args.no_budget:
        return None
    secs = args.budget_time if args.budget_time is not None else (DEFAULT_SECONDS if heavy else None)
    mem = args.budget_mem if args.budget_mem is not None else (DEFAULT_MEM_GB if heavy else None)
    return Budget(secs, mem) if (secs or mem) else None


def cmd_verify(args) -> list[Verdict]:
    if args.target == "n3":
        return checks.suite_n3()
    if args.target == "n4":
        return checks.suite_n4_operators() + checks.suite_n4_flows() + checks.suite_compatibility(args.bracket_seconds)
    if args.target == "lax":
        return checks.suite_lax(4, 2, _budget(args, False))
    return checks.suite_properties()


def cmd_expand(args) -> list[Verdict]:
    N, k, depth = args.n, args.branch, args.depth
    if k not in range(1, N + 1):
        raise UsageError(f"--branch must be in 1..{N}")
    budget = _budget(args, N == 4 and depth >= 3)
    box: list = []

    def run():
        box.append(lax.expand_branch(N, k, depth, budget))
        return True, max(h.n_terms() for h in box[0].h), f"depth {depth}"

    out = [run_check(f"n{N}.k{k}.expand", f"branch {k} of the Lax expansion", run)]
    if not box:
        return out
    exp = box[0]
    for i, h in enumerate(exp.h):
        deg = quasi_degree(h)
        triv = is_trivial_density(h, ["u"])
        ok = h.is_zero() or deg == i + 1
        out.append(Verdict(f"n{N}.k{k}.h{i}", f"h_{i} quasi-degree {i + 1}", ok, 0.0, h.n_terms(), f"trivial={triv}"))
    if args.print:
        for i, h in enumerate(exp.h):
            print(f"h{i}{k} = {h.to_text()}")
    return out


def _parse_xi(text: str | None):
    if text is None:
        return None
    try:
        return tuple(Fraction(x.strip()) for x in text.split(","))
    except ValueError as exc:
        raise UsageError(f"bad --xi: {exc}") from None


def cmd_reconstruct(args) -> list[Verdict]:
    xi = _parse_xi(args.xi)
    if xi is not None and len(xi) != args.n:
        raise UsageError(f"--xi needs {args.n} entries")
    return checks.suite_reconstruct(args.n, xi, _budget(args, args.n == 4))


def cmd_schouten(args) -> list[Verdict]:
    ops = {}
    for name in (args.A, args.B):
        if name not in wdvv.OPERATORS:
            raise UsageError(f"unknown operator {name!r}; known: {', '.join(sorted(wdvv.OPERATORS))}")
        ops[name] = wdvv.OPERATORS[name]()
    A, B = ops[args.A], ops[args.B]
    if A.shape != B.shape or A.family != B.family or A.first != B.first:
        raise UsageError("operators act on different spaces")
    out = [run_check(f"skew.{name}", "skew-adjointness", lambda op=ops[name]: poisson.is_skew_adjoint(op)) for name in ops]
    if all(v.result for v in out):
        out.append(run_check(f"schouten.{args.A}.{args.B}", "Schouten bracket vanishes", lambda: poisson.schouten_bracket_vanishes(A, B)))
    return out


def cmd_curvature(args) -> list[Verdict]:
    metrics = {"g6": wdvv.g6, "g3": wdvv.n3_monge_metric}
    if args.metric not in metrics:
        raise UsageError(f"unknown metric {args.metric!r}; known: g3, g6")
    g = metrics[args.metric]()
    box: list = []

    def run():
        box.append(curvature(g))
        rep = box[0]
        if args.metric == "g3":
            return rep.riemann_is_zero(), 0, "flat"
        ok = (not rep.riemann_is_zero()) and rep.scalar.is_zero() and (not rep.weyl_is_zero())
        return ok, 0, f"riemann_zero={rep.riemann_is_zero()} scalar={rep.scalar.to_text()} weyl_zero={rep.weyl_is_zero()}"

    out = [run_check(f"curvature.{args.metric}", "curvature report", run)]
    if args.dump and box:
        print(json.dumps(box[0].nonzero(), indent=2, sort_keys=True))
    return out


def cmd_show(args) -> None:
    if args.dataset not in wdvv.DATASETS:
        raise UsageError(f"unknown dataset {args.dataset!r}; known: {', '.join(sorted(wdvv.DATASETS))}")
    print(render(wdvv.DATASETS[args.dataset]()))


# -- argument parsing -----------------------------------------------------------


def _budget_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--budget-mem", type=float, default=None, metavar="GB", help="peak memory cap in GB")
    p.add_argument("--budget-time", type=float, default=None, metavar="S", help="time cap in seconds")
    p.add_argument("--no-budget", action="store_true", help="disable the default caps")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wdvvkit", description="Exact verification of WDVV Hamiltonian structures.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("--cache-dir", default=None, help=f"cache directory (default: ${lax.CACHE_ENV})")
    ap.add_argument("--manifest", default=None, help="write the JSON manifest here")
    ap.add_argument("--json", action="store_true", help="print the manifest instead of the table")
    ap.add_argument("--fresh", action="store_true", help="ignore cached verdicts")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("target", choices=["n3", "n4", "lax", "props"])
    p.add_argument("--bracket-seconds", type=float, default=7200, help="cap for the six-component bracket")
    _budget_flags(p)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("expand", help="expand one branch of the Lax generating function")
    p.add_argument("--n", type=int, choices=[3, 4], default=4)
    p.add_argument("--branch", type=int, required=True)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--print", action="store_true", help="print the densities")
    _budget_flags(p)
    p.set_defaults(fn=cmd_expand)

    p = sub.add_parser("reconstruct", help="rebuild the leading metric from Lax densities")
    p.add_argument("--n", type=int, choices=[3, 4], default=4)
    p.add_argument("--xi", default=None, help='comma-separated constants, e.g. "1,1/3,0,1/2"')
    _budget_flags(p)
    p.set_defaults(fn=cmd_reconstruct)

    p = sub.add_parser("schouten", help="Schouten bracket of two named operators")
    p.add_argument("A")
    p.add_argument("B")
    p.set_defaults(fn=cmd_schouten)

    p = sub.add_parser("curvature", help="curvature report of a named metric")
    p.add_argument("metric")
    p.add_argument("--dump", action="store_true", help="print the nonzero components")
    p.set_defaults(fn=cmd_curvature)

    p = sub.add_parser("show", help="print a named dataset")
    p.add_argument("dataset")
    p.set_defaults(fn=cmd_show)
    return ap


def _command_key(args) -> list[str]:
    skip = {"fn", "cache_dir", "manifest", "json", "fresh"}
    return [f"{k}={v}" for k, v in sorted(vars(args).items()) if k not in skip]


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.command == "show":
            cmd_show(args)
            return EXIT_OK
        cache = resolve_cache_dir(args.cache_dir)
        key = _command_key(args)
        with cache_lock(cache):
            path = _verdict_path(cache, key) if cache else None
            if path is not None and path.exists() and not args.fresh:
                doc = json.loads(path.read_text())
            else:
                doc = manifest(key, args.fn(args))
                if path is not None and doc["status"] != "budget-exceeded":
                    path.parent.mkdir(parents=True, exist_ok=True)
                    tmp = path.with_suffix(".tmp")
                    tmp.write_text(dump(doc))
                    tmp.replace(path)
    except UsageError as exc:
        print(f"wdvvkit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = dump(doc)
    if args.manifest:
        Path(args.manifest).write_text(text)
    if args.json:
        sys.stdout.write(text)
    else:
        verdicts = [
            Verdict(c["id"], c["reference"], c["verdict"] == "pass", c["elapsed"], c["peak_terms"], c["detail"], c["verdict"] == "budget-exceeded")
            for c in doc["checks"]
        ]
        print(render_table(verdicts))
        print(f"status: {doc['status']}")
    return exit_code(doc)


if __name__ == "__main__":
    sys.exit(main())
