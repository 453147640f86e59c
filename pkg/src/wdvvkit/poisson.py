"""Hamiltonian property checks: skew-adjointness, Schouten bracket, DN,
Monge and Potemin conditions."""

from __future__ import annotations

import itertools
import time
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Callable, Iterable

from . import linalg
from .algebra import Expr, Var
from .budget import BudgetExceeded
from .diffop import FirstOrderDN, LocalOperator, adjoint, apply
from .geometry import MetricCandidate, christoffel, curvature, invert_metric
from .jet import evolutionary_derivative, jet, variational_derivative

__all__ = [
    "Verdict",
    "is_skew_adjoint",
    "trivector",
    "schouten_bracket_vanishes",
    "check_first_order_dn",
    "check_monge",
    "check_potemin",
    "monge_residuals",
    "potemin_residuals",
    "run_check",
]

COVECTORS = ("p", "q", "r")


@dataclass
class Verdict:
    """Outcome of one check, suitable for a manifest."""

    check: str
    subject: str
    result: bool
    elapsed: float = 0.0
    peak_terms: int = 0
    detail: str = ""
    budget_exceeded: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def run_check(check: str, subject: str, fn: Callable[[], object]) -> Verdict:
    """Time ``fn``; it returns a bool or a (bool, peak_terms, detail) triple."""
    t0 = time.perf_counter()
    try:
        out = fn()
    except BudgetExceeded as exc:
        return Verdict(check, subject, False, round(time.perf_counter() - t0, 3), 0, str(exc), True)
    elapsed = time.perf_counter() - t0
    if isinstance(out, tuple):
        ok, peak, detail = (list(out) + [0, ""])[:3]
    else:
        ok, peak, detail = out, 0, ""
    return Verdict(check, subject, bool(ok), round(elapsed, 3), int(peak), str(detail))


# -- skew-adjointness ---------------------------------------------------------


def is_skew_adjoint(a: LocalOperator) -> bool:
    return (adjoint(a) + a).is_zero()


# -- Schouten bracket -------------------------------------------------------


def _covector(name: str, op: LocalOperator) -> list[Expr]:
    return [jet(name, op.first + j, 0) for j in range(op.shape[1])]


def _pair(v: list[Expr], w: list[Expr]) -> Expr:
    acc = Expr.const(0)
    for x, y in zip(v, w):
        if not x.is_zero():
            acc = acc + x * y
    return acc


def _lin_term(a: LocalOperator, b: LocalOperator) -> Expr:
    """< l_{A,p}(B q), r >  where l_{A,p} differentiates A(field) p along B q."""
    fam, first = a.family, a.first
    ap = apply(a, _covector("p", a))
    bq = apply(b, _covector("q", b))
    flow = {(fam, first + i): e for i, e in enumerate(bq)}
    lin = [evolutionary_derivative(e, flow) for e in ap]
    return _pair(lin, _covector("r", a))


def _cycle(e: Expr) -> Expr:
    """Relabel p -> q -> r -> p."""
    nxt = {"p": "q", "q": "r", "r": "p"}
    m = {v: Var(nxt[v.family], v.index, v.order) for v in e.variables() if v.family in nxt}
    return e.relabel(m)


def trivector(a: LocalOperator, b: LocalOperator) -> Expr:
    """T(p,q,r) = cyclic sum of <l_{A,p}(Bq), r> + <l_{B,p}(Aq), r>."""
    if a.shape != b.shape or a.family != b.family or a.first != b.first:
        raise ValueError("operators act on different spaces")
    s = _lin_term(a, b)
    if a is not b:
        s = s + _lin_term(b, a)
    else:
        s = s * 2
    s1 = _cycle(s)
    s2 = _cycle(s1)
    return s + s1 + s2


def trivector_residual(a: LocalOperator, b: LocalOperator, full: bool = True) -> list[Expr]:
    """Euler derivatives of the trivector that must vanish.

    T is linear in p, so  T = sum p_i E_{p_i}(T) + D_x(...); the p-derivatives
    therefore already decide whether T is a total derivative. ``full`` also
    returns the derivatives in every other jet variable.
    """
    T = trivector(a, b)
    comps = sorted({(v.family, v.index) for v in T.variables() if not v.is_param})
    if not full:
        comps = [c for c in comps if c[0] == "p"]
    return [variational_derivative(T, f, i) for f, i in comps]


def schouten_bracket_vanishes(a: LocalOperator, b: LocalOperator, full: bool = True) -> bool:
    if not is_skew_adjoint(a) or not is_skew_adjoint(b):
        raise ValueError("Schouten bracket requires skew-adjoint operators")
    return all(e.is_zero() for e in trivector_residual(a, b, full))


# -- first-order Dubrovin-Novikov criterion -----------------------------------


def check_first_order_dn(op: FirstOrderDN) -> bool:
    """Gamma^i_{jk} = -g_{js} b_k^{si} is the flat Levi-Civita connection of g."""
    n = op.n
    gcov = linalg.inverse(op.g)
    gamma = [
        [[_sum(-gcov[j][s] * op.b[k][s][i] for s in range(n)) for k in range(n)] for j in range(n)]
        for i in range(n)
    ]
    if not all(gamma[i][j][k] == gamma[i][k][j] for i in range(n) for j in range(n) for k in range(j + 1, n)):
        return False
    metric = MetricCandidate(gcov, op.family, op.first)
    lc = christoffel(metric)
    if not all(gamma[i][j][k] == lc[i][j][k] for i in range(n) for j in range(n) for k in range(n)):
        return False
    return curvature(metric).riemann_is_zero()


def _sum(it: Iterable[Expr]) -> Expr:
    acc = Expr.const(0)
    for e in it:
        acc = acc + e
    return acc


# -- Monge and Potemin ------------------------------------------------------


def monge_residuals(g: MetricCandidate) -> dict[tuple[int, int, int], Expr]:
    n = g.n
    out = {}
    for m, k, s in itertools.combinations_with_replacement(range(n), 3):
        r = g.d(m, k, s) + g.d(k, s, m) + g.d(m, s, k)
        if not r.is_zero():
            out[(m, k, s)] = r
    return out


def check_monge(g: MetricCandidate) -> bool:
    return not monge_residuals(g)


def potemin_residuals(g: MetricCandidate) -> dict[tuple[int, int, int, int], Expr]:
    """g_{mk,sl} - g_{ms,kl} + 1/3 g^{pq}(g_{pl,m} - g_{pm,l})(g_{qk,s} - g_{qs,k})."""
    n = g.n
    ginv = invert_metric(g).entries
    x = g.coords()
    d1 = [[[g.d(i, j, k) for k in range(n)] for j in range(n)] for i in range(n)]
    d2 = [[[[d1[i][j][k].diff(x[l]) for l in range(n)] for k in range(n)] for j in range(n)] for i in range(n)]
    # skew parts w[p][a][b] = g_{pa,b} - g_{pb,a}
    w = [[[d1[p][a][b] - d1[p][b][a] for b in range(n)] for a in range(n)] for p in range(n)]
    third = Fraction(1, 3)
    out = {}
    for m, k, s, l in itertools.product(range(n), repeat=4):
        lhs = d2[m][k][s][l] - d2[m][s][k][l]
        rhs = Expr.const(0)
        for p in range(n):
            wp = w[p][l][m]
            if wp.is_zero():
                continue
            for q in range(n):
                if ginv[p][q].is_zero() or w[q][k][s].is_zero():
                    continue
                rhs = rhs + ginv[p][q] * wp * w[q][k][s]
        r = lhs + rhs * third
        if not r.is_zero():
            out[(m, k, s, l)] = r
    return out


def check_potemin(g: MetricCandidate) -> bool:
    return not potemin_residuals(g)
