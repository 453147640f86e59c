"""Matrix differential operators  sum_k c_k D_x^k  with jet coefficients."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Mapping, Sequence

from . import linalg
from .algebra import Expr, Number, Var, from_text
from .jet import jet, potential_substitution, total_derivative
from .linalg import Matrix

__all__ = [
    "LocalOperator",
    "FirstOrderDN",
    "CanonicalThirdOrder",
    "FactorizedThirdOrder",
    "Dx",
    "mult",
    "compose",
    "adjoint",
    "apply",
    "build_first_order_dn",
    "build_third_order_canonical",
    "build_factorized",
    "reduce_to_first_order_in_b",
    "first_order_dn_from_operator",
]

Entry = dict  # order -> Expr


def _clean(entry: Mapping[int, Expr | Number]) -> Entry:
    out = {}
    for k, c in entry.items():
        c = linalg.as_expr(c)
        if not c.is_zero():
            out[int(k)] = c
    return out


def _add_into(acc: Entry, k: int, c: Expr) -> None:
    if c.is_zero():
        return
    if k in acc:
        s = acc[k] + c
        if s.is_zero():
            del acc[k]
        else:
            acc[k] = s
    else:
        acc[k] = c


def _derivs(c: Expr, upto: int, cache: dict) -> list[Expr]:
    key = c.to_text()
    got = cache.get(key)
    if got is None or len(got) <= upto:
        got = [c]
        for _ in range(upto):
            got.append(total_derivative(got[-1]))
        cache[key] = got
    return got


def _compose_scalar(a: Entry, b: Entry, cache: dict) -> Entry:
    """(sum a_k D^k) o (sum b_l D^l) by the Leibniz rule."""
    out: Entry = {}
    if not a or not b:
        return out
    for k, ca in a.items():
        for l, cb in b.items():
            ds = _derivs(cb, k, cache)
            for m in range(k + 1):
                d = ds[m]
                if d.is_zero():
                    continue
                _add_into(out, k - m + l, ca * d * comb(k, m))
    return out


class LocalOperator:
    """An ``n x m`` matrix of scalar differential operators.

    ``entries[i][j]`` maps an order k to the coefficient of D_x^k. Zero
    coefficients are never stored, so equality is entrywise equality.
    """

    __slots__ = ("entries", "family", "first")

    def __init__(self, entries: Sequence[Sequence[Mapping[int, Expr | Number]]], family: str = "a", first: int = 1):
        self.entries: tuple[tuple[Entry, ...], ...] = tuple(tuple(_clean(e) for e in row) for row in entries)
        if len({len(r) for r in self.entries}) > 1:
            raise ValueError("ragged operator matrix")
        self.family = family
        self.first = first

    # construction ---------------------------------------------------------
    @classmethod
    def from_coefficients(cls, coeffs: Mapping[int, Matrix], family: str = "a", first: int = 1) -> "LocalOperator":
        """Operator  sum_k coeffs[k] D_x^k  from coefficient matrices."""
        mats = {k: linalg.matrix(m) for k, m in coeffs.items()}
        some = next(iter(mats.values()))
        n, m = len(some), len(some[0])
        entries = [[{k: mats[k][i][j] for k in mats} for j in range(m)] for i in range(n)]
        return cls(entries, family, first)

    @classmethod
    def zero(cls, n: int, m: int | None = None, family: str = "a", first: int = 1) -> "LocalOperator":
        return cls([[{} for _ in range(n if m is None else m)] for _ in range(n)], family, first)

    # shape ----------------------------------------------------------------
    @property
    def shape(self) -> tuple[int, int]:
        return len(self.entries), len(self.entries[0]) if self.entries else 0

    @property
    def n(self) -> int:
        return len(self.entries)

    @property
    def order(self) -> int:
        return max((k for row in self.entries for e in row for k in e), default=-1)

    def coefficient(self, k: int) -> Matrix:
        zero = Expr.const(0)
        return [[e.get(k, zero) for e in row] for row in self.entries]

    def __getitem__(self, ij: tuple[int, int]) -> Entry:
        i, j = ij
        return self.entries[i][j]

    def is_zero(self) -> bool:
        return all(not e for row in self.entries for e in row)

    def max_terms(self) -> int:
        return max((c.n_terms() for row in self.entries for e in row for c in e.values()), default=0)

    def _like(self, entries) -> "LocalOperator":
        return LocalOperator(entries, self.family, self.first)

    # algebra --------------------------------------------------------------
    def __add__(self, other: "LocalOperator") -> "LocalOperator":
        if self.shape != other.shape:
            raise ValueError("operator dimensions differ")
        out = []
        for ra, rb in zip(self.entries, other.entries):
            row = []
            for ea, eb in zip(ra, rb):
                e = dict(ea)
                for k, c in eb.items():
                    _add_into(e, k, c)
                row.append(e)
            out.append(row)
        return self._like(out)

    def __neg__(self) -> "LocalOperator":
        return self._like([[{k: -c for k, c in e.items()} for e in row] for row in self.entries])

    def __sub__(self, other: "LocalOperator") -> "LocalOperator":
        return self + (-other)

    def scale(self, c: Expr | Number) -> "LocalOperator":
        c = linalg.as_expr(c)
        return self._like([[{k: c * v for k, v in e.items()} for e in row] for row in self.entries])

    def __matmul__(self, other: "LocalOperator") -> "LocalOperator":
        return compose(self, other)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LocalOperator):
            return NotImplemented
        if self.shape != other.shape:
            return False
        for ra, rb in zip(self.entries, other.entries):
            for ea, eb in zip(ra, rb):
                if ea.keys() != eb.keys() or any(ea[k] != eb[k] for k in ea):
                    return False
        return True

    __hash__ = None

    def transpose(self) -> "LocalOperator":
        """Entrywise transpose (not the adjoint)."""
        n, m = self.shape
        return self._like([[self.entries[i][j] for i in range(n)] for j in range(m)])

    def map_coefficients(self, f, family: str | None = None) -> "LocalOperator":
        out = [[{k: f(c) for k, c in e.items()} for e in row] for row in self.entries]
        return LocalOperator(out, family or self.family, self.first)

    # serialization --------------------------------------------------------
    def to_data(self) -> dict:
        return {
            "family": self.family,
            "first": self.first,
            "entries": [[[[k, e[k].to_text()] for k in sorted(e)] for e in row] for row in self.entries],
        }

    @classmethod
    def from_data(cls, data: Mapping) -> "LocalOperator":
        entries = [[{int(k): from_text(t) for k, t in e} for e in row] for row in data["entries"]]
        return cls(entries, data.get("family", "a"), data.get("first", 1))

    def to_infix(self) -> list[list[str]]:
        def fmt(e: Entry) -> str:
            if not e:
                return "0"
            parts = []
            for k in sorted(e, reverse=True):
                d = "" if k == 0 else ("D" if k == 1 else f"D^{k}")
                c = e[k].to_infix()
                if d and c == "1":
                    parts.append(d)
                elif d:
                    parts.append(f"({c}) {d}")
                else:
                    parts.append(f"({c})")
            return " + ".join(parts)

        return [[fmt(e) for e in row] for row in self.entries]

    def __repr__(self) -> str:
        return f"LocalOperator({self.shape[0]}x{self.shape[1]}, order={self.order}, family={self.family!r})"


# -- basic operators ------------------------------------------------------


def Dx(n: int, k: int = 1, family: str = "a", first: int = 1) -> LocalOperator:
    """The scalar operator D_x^k times the n x n identity."""
    return LocalOperator([[{k: 1} if i == j else {} for j in range(n)] for i in range(n)], family, first)


def mult(m: Sequence[Sequence[Expr | Number]], family: str = "a", first: int = 1) -> LocalOperator:
    """Multiplication by a matrix of functions (order-0 operator)."""
    return LocalOperator([[{0: c} for c in row] for row in m], family, first)


def compose(a: LocalOperator, b: LocalOperator) -> LocalOperator:
    n, m = a.shape
    m2, p = b.shape
    if m != m2:
        raise ValueError(f"cannot compose {a.shape} with {b.shape}")
    cache: dict = {}
    out = []
    for i in range(n):
        row = []
        for j in range(p):
            e: Entry = {}
            for l in range(m):
                for k, c in _compose_scalar(a.entries[i][l], b.entries[l][j], cache).items():
                    _add_into(e, k, c)
            row.append(e)
        out.append(row)
    return LocalOperator(out, a.family, a.first)


def adjoint(a: LocalOperator) -> LocalOperator:
    """Formal adjoint: (A*)_{ji} = sum_k (-D_x)^k o c_k^{ij}."""
    n, m = a.shape
    out = [[{} for _ in range(n)] for _ in range(m)]
    for i in range(n):
        for j in range(m):
            e = out[j][i]
            for k, c in a.entries[i][j].items():
                ds = [c]
                for _ in range(k):
                    ds.append(total_derivative(ds[-1]))
                sign = -1 if k % 2 else 1
                for mm in range(k + 1):
                    _add_into(e, mm, ds[k - mm] * (sign * comb(k, mm)))
    return LocalOperator(out, a.family, a.first)


def apply(a: LocalOperator, v: Sequence[Expr | Number]) -> list[Expr]:
    """Componentwise  sum_j sum_k c_k^{ij} D_x^k v_j."""
    n, m = a.shape
    if len(v) != m:
        raise ValueError(f"operator has {m} columns, vector has {len(v)} entries")
    vs = [linalg.as_expr(x) for x in v]
    top = max(a.order, 0)
    ders = []
    for x in vs:
        d = [x]
        for _ in range(top):
            d.append(total_derivative(d[-1]) if not d[-1].is_zero() else d[-1])
        ders.append(d)
    out = []
    for i in range(n):
        acc = Expr.const(0)
        for j in range(m):
            for k, c in a.entries[i][j].items():
                t = ders[j][k]
                if not t.is_zero():
                    acc = acc + c * t
        out.append(acc)
    return out


# -- structured operator data ---------------------------------------------


def _check_order0(m: Matrix, family: str) -> None:
    for row in m:
        for e in row:
            for v in e.variables():
                if v.family == family and v.order:
                    raise ValueError("metric entries must not depend on derivatives")


@dataclass(frozen=True)
class FirstOrderDN:
    """g^{ij} D_x + b_k^{ij} a^k_x with b[k][i][j] = b_k^{ij}."""

    g: Matrix
    b: tuple
    family: str = "a"
    first: int = 1

    def __post_init__(self):
        _check_order0(self.g, self.family)
        if linalg.det(self.g).is_zero():
            raise ValueError("degenerate leading coefficient")

    @property
    def n(self) -> int:
        return len(self.g)

    def operator(self) -> LocalOperator:
        n = self.n
        zero = Expr.const(0)
        c0 = [[zero] * n for _ in range(n)]
        for k, bk in enumerate(self.b):
            ax = jet(self.family, self.first + k, 1)
            for i in range(n):
                for j in range(n):
                    if not bk[i][j].is_zero():
                        c0[i][j] = c0[i][j] + bk[i][j] * ax
        return LocalOperator.from_coefficients({1: self.g, 0: c0}, self.family, self.first)


def build_first_order_dn(g1, b1=None, family: str = "a", first: int = 1) -> LocalOperator:
    if isinstance(g1, FirstOrderDN):
        return g1.operator()
    g1 = linalg.matrix(g1)
    n = len(g1)
    if b1 is None:
        b1 = [linalg.zeros(n) for _ in range(n)]
    b1 = tuple(linalg.matrix(bk) for bk in b1)
    return FirstOrderDN(g1, b1, family, first).operator()


def first_order_dn_from_operator(op: LocalOperator) -> FirstOrderDN:
    """Read g and b_k off a first-order operator g D_x + (linear in a_x)."""
    if op.order > 1:
        raise ValueError("operator is not of first order")
    n = op.n
    g = op.coefficient(1)
    c0 = op.coefficient(0)
    xs = [Var(op.family, op.first + k, 1) for k in range(n)]
    b = tuple([[c0[i][j].diff(xs[k]) for j in range(n)] for i in range(n)] for k in range(n))
    dn = FirstOrderDN(g, b, op.family, op.first)
    if dn.operator() != op:
        raise ValueError("operator is not of Dubrovin-Novikov type")
    return dn


@dataclass(frozen=True)
class CanonicalThirdOrder:
    """D_x (g^{ij} D_x + c_k^{ij} a^k_x) D_x  from a covariant metric."""

    metric: object  # geometry.MetricCandidate
    ginv: Matrix = field(repr=False)
    c_lower: list = field(repr=False)  # c_{skm} as [s][k][m]
    c_upper: list = field(repr=False)  # c_k^{ij} as [k][i][j]

    @classmethod
    def from_metric(cls, g) -> "CanonicalThirdOrder":
        from .geometry import invert_metric

        if g.contravariant:
            raise ValueError("expected a covariant metric")
        _check_order0(g.entries, g.family)
        n = g.n
        ginv = invert_metric(g).entries
        third = Expr.const(1) / 3
        cl = [[[(g.d(s, m, k) - g.d(s, k, m)) * third for m in range(n)] for k in range(n)] for s in range(n)]
        # c_k^{ij} = g^{iq} g^{jp} c_{pqk}; this ordering reproduces the known
        # three-component operator, the transposed one gives its transpose
        half = [[[_dot(ginv[j], [cl[p][q][k] for p in range(n)]) for k in range(n)] for j in range(n)] for q in range(n)]
        cu = [[[_dot(ginv[i], [half[q][j][k] for q in range(n)]) for j in range(n)] for i in range(n)] for k in range(n)]
        return cls(g, ginv, cl, cu)

    def operator(self) -> LocalOperator:
        g = self.metric
        n = g.n
        zero = Expr.const(0)
        c0 = [[zero] * n for _ in range(n)]
        for k in range(n):
            ax = jet(g.family, g.first + k, 1)
            for i in range(n):
                for j in range(n):
                    c = self.c_upper[k][i][j]
                    if not c.is_zero():
                        c0[i][j] = c0[i][j] + c * ax
        mid = LocalOperator.from_coefficients({1: self.ginv, 0: c0}, g.family, g.first)
        d = Dx(n, 1, g.family, g.first)
        return d @ mid @ d


def _dot(a: Sequence[Expr], b: Sequence[Expr]) -> Expr:
    acc = Expr.const(0)
    for x, y in zip(a, b):
        if not x.is_zero() and not y.is_zero():
            acc = acc + x * y
    return acc


def build_third_order_canonical(g) -> LocalOperator:
    return CanonicalThirdOrder.from_metric(g).operator()


@dataclass(frozen=True)
class FactorizedThirdOrder:
    """phi^{bc} D_x psi_b^i D_x psi_c^j D_x  with psi = (psi_i^c) linear in a.

    ``psi[i][c]`` holds psi_i^c (row i, column c); ``phi`` is constant.
    """

    psi: Matrix
    phi: Matrix
    family: str = "a"
    first: int = 1

    def __post_init__(self):
        n = len(self.psi)
        for row in self.psi:
            for e in row:
                if not e.is_polynomial() or any(v.family != self.family or v.order for v in e.variables()):
                    raise ValueError("psi must be polynomial in undifferentiated fields")
                if any(e.degree(v) > 1 for v in e.variables()) or _total_degree(e) > 1:
                    raise ValueError("psi must be linear in the fields")
        for row in self.phi:
            for e in row:
                if not e.is_constant():
                    raise ValueError("phi must be constant")
        if linalg.det(self.psi).is_zero():
            raise ValueError("psi is degenerate")
        if linalg.det(self.phi).is_zero():
            raise ValueError("phi is degenerate")
        if len(self.phi) != n:
            raise ValueError("psi and phi sizes differ")

    @property
    def n(self) -> int:
        return len(self.psi)

    def coord(self, m: int) -> Var:
        return Var(self.family, self.first + m, 0)

    def psi_lin(self) -> list[list[list[Expr]]]:
        """psi_{km}^c as [c][k][m]."""
        n = self.n
        return [[[self.psi[k][c].diff(self.coord(m)) for m in range(n)] for k in range(n)] for c in range(n)]

    def omega(self) -> list[list[Expr]]:
        """omega_k^c as [c][k]."""
        n = self.n
        zeros = {self.coord(m): 0 for m in range(n)}
        return [[self.psi[k][c].subs(zeros) for k in range(n)] for c in range(n)]

    def is_skew(self) -> bool:
        lin = self.psi_lin()
        n = self.n
        return all((lin[c][k][m] + lin[c][m][k]).is_zero() for c in range(n) for k in range(n) for m in range(n))

    def psi_inv(self) -> Matrix:
        """psi_c^i as [c][i]."""
        return linalg.inverse(self.psi)

    def phi_inv(self) -> Matrix:
        return linalg.inverse(self.phi)

    def metric_entries(self) -> Matrix:
        return linalg.matmul(linalg.matmul(self.psi, self.phi), linalg.transpose(self.psi))

    def operator(self) -> LocalOperator:
        n = self.n
        pinv = self.psi_inv()
        left = linalg.matmul(linalg.transpose(pinv), self.phi_inv())
        d = Dx(n, 1, self.family, self.first)
        return d @ mult(left, self.family, self.first) @ d @ mult(pinv, self.family, self.first) @ d

    def reduced_operator(self) -> LocalOperator:
        n = self.n
        pinv = self.psi_inv()
        left = linalg.matmul(linalg.transpose(pinv), self.phi_inv())
        d = Dx(n, 1, self.family, self.first)
        op = -(mult(left, self.family, self.first) @ d @ mult(pinv, self.family, self.first))
        return op.map_coefficients(lambda c: potential_substitution(c, self.family, "b"), family="b")


def _total_degree(e: Expr) -> int:
    return max((sum(exps) for exps, _ in e.num.terms()), default=0)


def build_factorized(psi, phi, family: str = "a", first: int = 1) -> LocalOperator:
    if isinstance(psi, FactorizedThirdOrder):
        return psi.operator()
    return FactorizedThirdOrder(linalg.matrix(psi), linalg.matrix(phi), family, first).operator()


def reduce_to_first_order_in_b(a2: FactorizedThirdOrder) -> LocalOperator:
    """-phi^{bc} psi_b^i D_x psi_c^s  in potentials  a = b_x."""
    return a2.reduced_operator()
