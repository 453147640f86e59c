"""Jet coordinates, total derivative and the Euler operator."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .algebra import Expr, Var

__all__ = [
    "jet",
    "jet_var",
    "Density",
    "total_derivative",
    "total_derivative_n",
    "variational_derivative",
    "gradient",
    "is_trivial_density",
    "potential_substitution",
    "evolutionary_derivative",
    "jet_order",
    "quasi_degree",
]

FIELD_FAMILIES = ("u", "a", "b")
COVECTOR_FAMILIES = ("p", "q", "r")


def jet_var(family: str, index: int, order: int = 0) -> Var:
    return Var(family, index, order)


def jet(family: str, index: int, order: int = 0) -> Expr:
    """The jet coordinate ``family[index, order]`` as an expression."""
    return Expr.var(Var(family, index, order))


def _next(v: Var) -> Var | None:
    return None if v.is_param else v.shifted(1)


def _reject_x(e: Expr) -> None:
    if Var("x") in e.variables():
        raise ValueError("densities with explicit x-dependence are not supported")


def total_derivative(e: Expr) -> Expr:
    """D_x e, raising the order of every jet coordinate by one."""
    return e.derivation(_next)


def total_derivative_n(e: Expr, k: int) -> Expr:
    for _ in range(k):
        e = total_derivative(e)
    return e


def jet_order(e: Expr, family: str | None = None) -> int:
    """Highest derivative order present (-1 when no jet variable occurs)."""
    orders = [v.order for v in e.variables() if not v.is_param and (family is None or v.family == family)]
    return max(orders, default=-1)


def variational_derivative(h: Expr, family: str, index: int) -> Expr:
    """Euler operator  E_i(h) = sum_k (-D_x)^k dh/d(family[i,k])."""
    _reject_x(h)
    top = max((v.order for v in h.variables() if v.family == family and v.index == index), default=-1)
    if top < 0:
        return Expr.const(0)
    acc = h.diff(Var(family, index, top))
    for k in range(top - 1, -1, -1):
        acc = h.diff(Var(family, index, k)) - total_derivative(acc)
    return acc


def gradient(h: Expr, family: str, components: Iterable[int]) -> list[Expr]:
    return [variational_derivative(h, family, i) for i in components]


def is_trivial_density(h: Expr, families: Iterable[str] | None = None) -> bool:
    """True iff every Euler derivative of ``h`` vanishes, i.e. ``h`` is a
    total x-derivative up to an additive constant."""
    _reject_x(h)
    comps = {(v.family, v.index) for v in h.variables() if not v.is_param}
    if families is not None:
        fams = set(families)
        comps = {c for c in comps if c[0] in fams}
    return all(variational_derivative(h, f, i).is_zero() for f, i in sorted(comps))


def potential_substitution(e: Expr, src: str = "a", dst: str = "b") -> Expr:
    """Replace every ``src[i,k]`` by ``dst[i,k+1]``  (a^i = b^i_x)."""
    mapping = {v: Var(dst, v.index, v.order + 1) for v in e.variables() if v.family == src}
    return e.relabel(mapping)


def evolutionary_derivative(e: Expr, flow: Mapping[tuple[str, int], Expr]) -> Expr:
    """Derivative of ``e`` along the evolution ``(family, i)_t = flow[(family, i)]``."""
    out = Expr.const(0)
    cache: dict[tuple[str, int, int], Expr] = {}
    for v in sorted(e.variables(), key=Var.sort_key):
        if v.is_param or (v.family, v.index) not in flow:
            continue
        key = (v.family, v.index, v.order)
        if key not in cache:
            base = flow[(v.family, v.index)]
            cache[key] = total_derivative_n(base, v.order)
        out = out + e.diff(v) * cache[key]
    return out


def quasi_degree(e: Expr) -> int | None:
    """Degree under deg(field) = 0, deg(D_x) = 1, or None if ``e`` is not
    quasi-homogeneous (denominators must depend on order-0 coordinates only)."""

    def weights(poly, space):
        ws = set()
        for exps, _ in poly.terms():
            ws.add(sum(e * (v.order or 0) for v, e in zip(space.vars, exps) if e and not v.is_param))
        return ws

    if e.is_zero():
        return None
    dw = weights(e.den, e.space)
    nw = weights(e.num, e.space)
    if len(dw) != 1 or len(nw) != 1:
        return None
    return nw.pop() - dw.pop()


@dataclass(frozen=True)
class Density:
    """A conservation-law density over one jet family."""

    value: Expr
    family: str
    n: int
    first: int = 1

    def __post_init__(self):
        _reject_x(self.value)

    @property
    def components(self) -> range:
        return range(self.first, self.first + self.n)

    def euler(self, i: int) -> Expr:
        return variational_derivative(self.value, self.family, i)

    def gradient(self) -> list[Expr]:
        return [self.euler(i) for i in self.components]

    def is_trivial(self) -> bool:
        return is_trivial_density(self.value, [self.family])

    def equivalent(self, other: "Density | Expr") -> bool:
        """Same functional, i.e. the difference is a total derivative."""
        o = other.value if isinstance(other, Density) else other
        return Density(self.value - o, self.family, self.n, self.first).is_trivial()

    def __sub__(self, other: "Density") -> "Density":
        return Density(self.value - other.value, self.family, self.n, self.first)
