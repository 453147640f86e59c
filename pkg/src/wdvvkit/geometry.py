"""Exact pseudo-Riemannian tensor calculus on metrics with rational entries."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from fractions import Fraction

from . import linalg
from .algebra import Expr, Var
from .linalg import Matrix

__all__ = [
    "MetricCandidate",
    "SingularMetricError",
    "CoordinateMap",
    "CurvatureReport",
    "invert_metric",
    "metric_det",
    "christoffel",
    "curvature",
    "pushforward_metric",
]


class SingularMetricError(ArithmeticError):
    """det g vanishes identically."""


@dataclass(frozen=True)
class MetricCandidate:
    """Symmetric matrix of order-0 expressions in the coordinates
    ``family[first], ..., family[first+n-1]``."""

    entries: Matrix
    family: str = "a"
    first: int = 1
    contravariant: bool = False
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "entries", linalg.matrix(self.entries))
        n = len(self.entries)
        if any(len(row) != n for row in self.entries):
            raise ValueError("metric must be square")

    @property
    def n(self) -> int:
        return len(self.entries)

    def coord(self, i: int) -> Var:
        return Var(self.family, self.first + i, 0)

    def coords(self) -> list[Var]:
        return [self.coord(i) for i in range(self.n)]

    def __getitem__(self, ij: tuple[int, int]) -> Expr:
        i, j = ij
        return self.entries[i][j]

    def d(self, i: int, j: int, k: int) -> Expr:
        """Partial derivative  g_{ij,k}."""
        return self.entries[i][j].diff(self.coord(k))

    def is_symmetric(self) -> bool:
        return linalg.is_symmetric(self.entries)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MetricCandidate):
            return NotImplemented
        return linalg.mat_eq(self.entries, other.entries)

    __hash__ = None


def metric_det(g: MetricCandidate) -> Expr:
    return linalg.det(g.entries)


def invert_metric(g: MetricCandidate) -> MetricCandidate:
    try:
        inv = linalg.inverse(g.entries)
    except linalg.SingularMatrixError:
        raise SingularMetricError(f"metric {g.name or ''} is degenerate") from None
    return replace(g, entries=inv, contravariant=not g.contravariant)


def christoffel(g: MetricCandidate, ginv: MetricCandidate | None = None) -> list[list[list[Expr]]]:
    """Levi-Civita symbols  Gamma^i_{jk}  of a covariant metric."""
    if g.contravariant:
        raise ValueError("christoffel expects a covariant metric")
    n = g.n
    ginv = ginv or invert_metric(g)
    dg = [[[g.d(i, j, k) for k in range(n)] for j in range(n)] for i in range(n)]
    first = [
        [[(dg[l][j][k] + dg[l][k][j] - dg[j][k][l]) * Fraction(1, 2) for k in range(n)] for j in range(n)]
        for l in range(n)
    ]
    gam = [[[Expr.const(0)] * n for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(n):
            for k in range(j, n):
                acc = Expr.const(0)
                for l in range(n):
                    if not ginv.entries[i][l].is_zero() and not first[l][j][k].is_zero():
                        acc = acc + ginv.entries[i][l] * first[l][j][k]
                gam[i][j][k] = acc
                gam[i][k][j] = acc
    return gam


@dataclass
class CurvatureReport:
    christoffel: list
    riemann: list  # R^i_{jkl}
    riemann_lower: list  # R_{ijkl}
    ricci: Matrix
    scalar: Expr
    weyl: list
    n: int = 0

    def riemann_is_zero(self) -> bool:
        return all(e.is_zero() for e in _flat(self.riemann))

    def weyl_is_zero(self) -> bool:
        return all(e.is_zero() for e in _flat(self.weyl))

    def ricci_is_zero(self) -> bool:
        return all(e.is_zero() for row in self.ricci for e in row)

    def nonzero(self) -> dict:
        """Component lists holding only the nonzero entries, as text."""

        def listing(t, rank):
            out = []
            for idx in itertools.product(range(self.n), repeat=rank):
                e = t
                for i in idx:
                    e = e[i]
                if not e.is_zero():
                    out.append({"index": list(idx), "value": e.to_text()})
            return out

        return {
            "christoffel": listing(self.christoffel, 3),
            "riemann": listing(self.riemann, 4),
            "ricci": listing(self.ricci, 2),
            "scalar": self.scalar.to_text(),
            "weyl": listing(self.weyl, 4),
        }


def _flat(t):
    if isinstance(t, Expr):
        yield t
    else:
        for x in t:
            yield from _flat(x)


def curvature(g: MetricCandidate) -> CurvatureReport:
    """Riemann, Ricci, scalar and Weyl curvature of a covariant metric."""
    n = g.n
    ginv = invert_metric(g)
    gam = christoffel(g, ginv)
    coords = g.coords()
    dgam = [[[[gam[i][j][k].diff(coords[l]) for l in range(n)] for k in range(n)] for j in range(n)] for i in range(n)]
    zero = Expr.const(0)
    R = [[[[zero] * n for _ in range(n)] for _ in range(n)] for _ in range(n)]
    for i, j, k in itertools.product(range(n), repeat=3):
        for l in range(k + 1, n):
            acc = dgam[i][l][j][k] - dgam[i][k][j][l]
            for m in range(n):
                a, b = gam[i][k][m], gam[m][l][j]
                if not a.is_zero() and not b.is_zero():
                    acc = acc + a * b
                a, b = gam[i][l][m], gam[m][k][j]
                if not a.is_zero() and not b.is_zero():
                    acc = acc - a * b
            R[i][j][k][l] = acc
            R[i][j][l][k] = -acc
    RL = [[[[zero] * n for _ in range(n)] for _ in range(n)] for _ in range(n)]
    for i, j, k in itertools.product(range(n), repeat=3):
        for l in range(k + 1, n):
            acc = zero
            for m in range(n):
                if not g.entries[i][m].is_zero() and not R[m][j][k][l].is_zero():
                    acc = acc + g.entries[i][m] * R[m][j][k][l]
            RL[i][j][k][l] = acc
            RL[i][j][l][k] = -acc
    ric = [[sum_exprs(R[i][j][i][l] for i in range(n)) for l in range(n)] for j in range(n)]
    scal = sum_exprs(ginv.entries[j][l] * ric[j][l] for j in range(n) for l in range(n) if not ginv.entries[j][l].is_zero())
    W = _weyl(g.entries, RL, ric, scal, n)
    return CurvatureReport(gam, R, RL, ric, scal, W, n)


def sum_exprs(it) -> Expr:
    acc = Expr.const(0)
    for e in it:
        acc = acc + e
    return acc


def _weyl(gm: Matrix, RL, ric: Matrix, scal: Expr, n: int):
    zero = Expr.const(0)
    if n < 3:
        return [[[[zero] * n for _ in range(n)] for _ in range(n)] for _ in range(n)]
    c1 = Fraction(1, n - 2)
    c2 = Fraction(1, (n - 1) * (n - 2))
    W = [[[[zero] * n for _ in range(n)] for _ in range(n)] for _ in range(n)]
    for a, b, c, d in itertools.product(range(n), repeat=4):
        if d <= c:
            continue
        t = gm[a][c] * ric[b][d] - gm[a][d] * ric[b][c] - gm[b][c] * ric[a][d] + gm[b][d] * ric[a][c]
        s = gm[a][c] * gm[b][d] - gm[a][d] * gm[b][c]
        w = RL[a][b][c][d] - t * c1 + scal * s * c2
        W[a][b][c][d] = w
        W[a][b][d][c] = -w
    return W


@dataclass(frozen=True)
class CoordinateMap:
    """New coordinates ``target[i]`` as functions of the old ``source`` ones.

    ``inverse`` (old as functions of new) is optional; without it, pushed
    tensors stay expressed in the old variables.
    """

    source: str
    source_first: int
    target: str
    target_first: int
    forward: tuple[Expr, ...]
    inverse: tuple[Expr, ...] | None = None

    @property
    def n(self) -> int:
        return len(self.forward)

    def source_vars(self) -> list[Var]:
        return [Var(self.source, self.source_first + i, 0) for i in range(self.n)]

    def target_vars(self) -> list[Var]:
        return [Var(self.target, self.target_first + i, 0) for i in range(self.n)]

    def jacobian(self) -> Matrix:
        """J[i][m] = d target^i / d source^m."""
        xs = self.source_vars()
        return [[y.diff(x) for x in xs] for y in self.forward]

    def pull(self, e: Expr) -> Expr:
        """Rewrite an expression in target coordinates through the old ones."""
        return e.subs(dict(zip(self.target_vars(), self.forward)))

    def pull_jet(self, e: Expr) -> Expr:
        """Like ``pull`` but also rewrites x-derivatives of the target coordinates."""
        from .jet import total_derivative

        mapping = {}
        for v in e.variables():
            if v.family == self.target and not v.is_param:
                f = self.forward[v.index - self.target_first]
                for _ in range(v.order):
                    f = total_derivative(f)
                mapping[v] = f
        return e.subs(mapping)

    def push(self, e: Expr) -> Expr:
        if self.inverse is None:
            raise ValueError("coordinate map has no explicit inverse")
        return e.subs(dict(zip(self.source_vars(), self.inverse)))

    def then(self, other: "CoordinateMap") -> "CoordinateMap":
        """Composite map: first ``self``, then ``other``."""
        if other.source != self.target or other.source_first != self.target_first:
            raise ValueError("maps do not compose")
        fwd = tuple(self.pull(e) for e in other.forward)
        inv = None
        if self.inverse is not None and other.inverse is not None:
            inv = tuple(other.push(e) for e in self.inverse)
        return CoordinateMap(self.source, self.source_first, other.target, other.target_first, fwd, inv)


def pushforward_metric(g: MetricCandidate, cmap: CoordinateMap) -> MetricCandidate:
    """Transform a (co- or contravariant) metric to the target coordinates.

    Entries are written in the target variables when the map has an inverse,
    and in the source variables otherwise.
    """
    if g.family != cmap.source or g.n != cmap.n:
        raise ValueError("metric and coordinate map disagree on coordinates")
    J = cmap.jacobian()
    if g.contravariant:
        new = linalg.matmul(linalg.matmul(J, g.entries), linalg.transpose(J))
    else:
        try:
            Ji = linalg.inverse(J)
        except linalg.SingularMatrixError:
            raise SingularMetricError("coordinate map has singular Jacobian") from None
        new = linalg.matmul(linalg.matmul(linalg.transpose(Ji), g.entries), Ji)
    family, first = g.family, g.first
    if cmap.inverse is not None:
        new = [[cmap.push(e) for e in row] for row in new]
        family, first = cmap.target, cmap.target_first
    return MetricCandidate(new, family, first, g.contravariant, g.name)
