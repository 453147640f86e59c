"""Exact rational-function arithmetic over multivariate polynomials.

Every value is a reduced fraction ``num / den`` of integer polynomials
(FLINT ``fmpz_mpoly``) living in a :class:`Space`, an ordered tuple of
variables.  The canonical form is: ``gcd(num, den) = 1`` over ``Z[x]``
(integer content included) and ``den`` has a positive leading coefficient
under graded-lexicographic order.  That makes structural equality a
complete zero test.  Text output divides through by the leading
coefficient of ``den`` so the printed denominator is monic.
"""

from __future__ import annotations

import ast
import functools
import re
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Mapping, NamedTuple, Union

import flint

__all__ = [
    "Var",
    "Space",
    "Expr",
    "Number",
    "canonicalize",
    "equals_zero",
    "parse",
    "from_text",
    "from_tree",
    "const",
    "var",
    "ZERO",
    "ONE",
]

Number = Union[int, Fraction]

FAMILY_RANK = {"u": 0, "a": 1, "b": 2, "p": 3, "q": 4, "r": 5}


class Var(NamedTuple):
    """A variable: jet coordinate ``family[index, order]`` or a bare parameter.

    Parameters (``index is None``) are x-independent symbols such as the
    spectral parameter; the total derivative kills them.
    """

    family: str
    index: int | None = None
    order: int | None = None

    @property
    def is_param(self) -> bool:
        return self.index is None

    def sort_key(self) -> tuple:
        if self.index is None:
            return (1, 0, self.family, 0, 0)
        return (0, FAMILY_RANK.get(self.family, 6), self.family, self.index, self.order)

    def shifted(self, k: int = 1) -> "Var":
        return Var(self.family, self.index, self.order + k)

    def __str__(self) -> str:
        if self.index is None:
            return self.family
        return f"{self.family}[{self.index},{self.order}]"

    __repr__ = __str__


_VAR_RE = re.compile(r"^([A-Za-z_][A-Za-z_0-9]*)\[(-?\d+),(\d+)\]$")
_SHORT_RE = re.compile(r"^([a-z])(\d+)(?:_(x+))?$")
_IDENT_RE = re.compile(r"^[A-Za-z_][A-Za-z_0-9]*$")


def var_from_str(s: str) -> Var:
    m = _VAR_RE.match(s)
    if m:
        return Var(m.group(1), int(m.group(2)), int(m.group(3)))
    if _IDENT_RE.match(s):
        return Var(s)
    raise ValueError(f"not a variable: {s!r}")


class Space:
    """Ordered set of variables with its FLINT context.  Interned."""

    __slots__ = ("vars", "index", "ctx", "gens", "__weakref__")

    def __init__(self, vars_: tuple[Var, ...]):
        self.vars = vars_
        self.index = {v: i for i, v in enumerate(vars_)}
        self.ctx = flint.fmpz_mpoly_ctx.get(tuple(str(v) for v in vars_), "deglex")
        self.gens = self.ctx.gens()

    @staticmethod
    def of(vars_: Iterable[Var]) -> "Space":
        return _intern(tuple(sorted(set(vars_), key=Var.sort_key)))

    def __contains__(self, v: Var) -> bool:
        return v in self.index

    def __len__(self) -> int:
        return len(self.vars)

    def __repr__(self) -> str:
        return f"Space({', '.join(map(str, self.vars))})"

    def union(self, other: "Space") -> "Space":
        if other is self:
            return self
        return _union(self, other)

    def with_vars(self, extra: Iterable[Var]) -> "Space":
        extra = [v for v in extra if v not in self.index]
        if not extra:
            return self
        return Space.of(self.vars + tuple(extra))

    def zero(self):
        return self.ctx.from_dict({})

    def constant(self, c: int):
        return self.ctx.constant(c)

    def convert(self, poly, target: "Space"):
        if target is self:
            return poly
        return poly.compose(*_embedding(self, target), ctx=target.ctx)


@functools.lru_cache(maxsize=None)
def _intern(vars_: tuple[Var, ...]) -> Space:
    return Space(vars_)


@functools.lru_cache(maxsize=4096)
def _union(s1: Space, s2: Space) -> Space:
    return Space.of(s1.vars + s2.vars)


@functools.lru_cache(maxsize=4096)
def _embedding(src: Space, dst: Space) -> tuple:
    zero = dst.zero()
    return tuple(dst.gens[dst.index[v]] if v in dst.index else zero for v in src.vars)


_EMPTY = Space.of(())


def _reduce(space: Space, num, den) -> "Expr":
    if den.is_zero():
        raise ZeroDivisionError("division by the zero polynomial")
    if num.is_zero():
        return Expr(space, num, space.constant(1))
    if not den.is_one():
        g = num.gcd(den)
        if not g.is_one():
            num = num / g
            den = den / g
        if den.leading_coefficient() < 0:
            num, den = -num, -den
    return Expr(space, num, den)


def _quotient_rule(space: Space, num, den, dnum, dden) -> "Expr":
    """(num/den)' in lowest terms, given num/den reduced.

    With g = gcd(den, den') the result is (num' den/g - num den'/g) / (den den/g);
    any remaining common factor divides den, so the final gcd is taken
    against den only instead of den^2.
    """
    if dden.is_zero():
        return _reduce(space, dnum, den)
    g = den.gcd(dden)
    dg = den / g
    n = dnum * dg - num * (dden / g)
    if n.is_zero():
        return Expr(space, n, space.constant(1))
    d = den * dg
    t = n.gcd(den)
    if not t.is_one():
        t = n.gcd(d)
        n, d = n / t, d / t
    if d.leading_coefficient() < 0:
        n, d = -n, -d
    return Expr(space, n, d)


class Expr:
    """Canonical rational function.  Immutable; do not call the constructor
    with non-canonical data (use :func:`canonicalize` or arithmetic)."""

    __slots__ = ("space", "num", "den", "_key")

    def __init__(self, space: Space, num, den):
        self.space = space
        self.num = num
        self.den = den
        self._key = None

    # -- construction -------------------------------------------------
    @staticmethod
    def const(c: Number, space: Space = _EMPTY) -> "Expr":
        c = Fraction(c)
        return Expr(space, space.constant(c.numerator), space.constant(c.denominator))

    @staticmethod
    def var(v: Var) -> "Expr":
        s = Space.of((v,))
        return Expr(s, s.gens[0], s.constant(1))

    @staticmethod
    def from_polys(space: Space, num, den=None) -> "Expr":
        if den is None:
            return Expr(space, num, space.constant(1))
        return _reduce(space, num, den)

    # -- space handling -----------------------------------------------
    def to_space(self, target: Space) -> "Expr":
        if target is self.space:
            return self
        return Expr(target, self.space.convert(self.num, target), self.space.convert(self.den, target))

    def _coerce(self, other) -> tuple["Expr", "Expr"]:
        if isinstance(other, Expr):
            if other.space is self.space:
                return self, other
            s = self.space.union(other.space)
            return self.to_space(s), other.to_space(s)
        if isinstance(other, (int, Fraction)):
            return self, Expr.const(other, self.space)
        return NotImplemented, NotImplemented

    def compact(self) -> "Expr":
        """Drop unused variables from the space."""
        used = self.variables()
        if len(used) == len(self.space):
            return self
        return self.to_space(Space.of(used))

    # -- predicates ---------------------------------------------------
    def is_zero(self) -> bool:
        return self.num.is_zero()

    def is_polynomial(self) -> bool:
        return self.den.is_one()

    def is_constant(self) -> bool:
        return self.num.is_constant() and self.den.is_constant()

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise ValueError("expression is not constant")
        n = int(self.num.coefficient(0)) if not self.num.is_zero() else 0
        return Fraction(n, int(self.den.coefficient(0)))

    def variables(self) -> set[Var]:
        out = set()
        for p in (self.num, self.den):
            if p.is_constant():
                continue
            for v, d in zip(self.space.vars, p.degrees()):
                if d:
                    out.add(v)
        return out

    def degree(self, v: Var) -> int:
        if v not in self.space:
            return 0
        return self.num.degrees()[self.space.index[v]]

    def n_terms(self) -> int:
        return len(self.num) + len(self.den)

    # -- arithmetic ---------------------------------------------------
    def __add__(self, other):
        a, b = self._coerce(other)
        if a is NotImplemented:
            return NotImplemented
        return a._add(b)

    __radd__ = __add__

    def _add(self, b: "Expr") -> "Expr":
        s = self.space
        n1, d1, n2, d2 = self.num, self.den, b.num, b.den
        if n1.is_zero():
            return b
        if n2.is_zero():
            return self
        if d1 == d2:
            return _reduce(s, n1 + n2, d1)
        if d1.is_one():
            return Expr(s, n1 * d2 + n2, d2)
        if d2.is_one():
            return Expr(s, n2 * d1 + n1, d1)
        g = d1.gcd(d2)
        if g.is_one():
            return Expr(s, n1 * d2 + n2 * d1, d1 * d2)
        d1g, d2g = d1 / g, d2 / g
        n = n1 * d2g + n2 * d1g
        if n.is_zero():
            return Expr(s, n, s.constant(1))
        t = n.gcd(g)
        if not t.is_one():
            n = n / t
            g = g / t
        return Expr(s, n, d1g * d2g * g)

    def __neg__(self) -> "Expr":
        return Expr(self.space, -self.num, self.den)

    def __sub__(self, other):
        a, b = self._coerce(other)
        if a is NotImplemented:
            return NotImplemented
        return a._add(-b)

    def __rsub__(self, other):
        a, b = self._coerce(other)
        if a is NotImplemented:
            return NotImplemented
        return b._add(-a)

    def __mul__(self, other):
        a, b = self._coerce(other)
        if a is NotImplemented:
            return NotImplemented
        return a._mul(b)

    __rmul__ = __mul__

    def _mul(self, b: "Expr") -> "Expr":
        s = self.space
        n1, d1, n2, d2 = self.num, self.den, b.num, b.den
        if n1.is_zero() or n2.is_zero():
            return Expr(s, s.zero(), s.constant(1))
        if d1.is_one() and d2.is_one():
            return Expr(s, n1 * n2, d1)
        g1 = n1.gcd(d2) if not d2.is_one() else None
        g2 = n2.gcd(d1) if not d1.is_one() else None
        if g1 is not None and not g1.is_one():
            n1, d2 = n1 / g1, d2 / g1
        if g2 is not None and not g2.is_one():
            n2, d1 = n2 / g2, d1 / g2
        return Expr(s, n1 * n2, d1 * d2)

    def inverse(self) -> "Expr":
        if self.num.is_zero():
            raise ZeroDivisionError("division by the zero polynomial")
        n, d = self.den, self.num
        if d.leading_coefficient() < 0:
            n, d = -n, -d
        return Expr(self.space, n, d)

    def __truediv__(self, other):
        a, b = self._coerce(other)
        if a is NotImplemented:
            return NotImplemented
        return a._mul(b.inverse())

    def __rtruediv__(self, other):
        a, b = self._coerce(other)
        if a is NotImplemented:
            return NotImplemented
        return b._mul(a.inverse())

    def __pow__(self, k: int) -> "Expr":
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return self.inverse() ** (-k)
        if k == 0:
            return Expr.const(1, self.space)
        return Expr(self.space, self.num**k, self.den**k)

    # -- equality -----------------------------------------------------
    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            return self.is_constant() and self.constant_value() == other
        if not isinstance(other, Expr):
            return NotImplemented
        a, b = self._coerce(other)
        return a.num == b.num and a.den == b.den

    def __ne__(self, other) -> bool:
        r = self.__eq__(other)
        return r if r is NotImplemented else not r

    def __hash__(self) -> int:
        if self._key is None:
            self._key = hash(self.to_text())
        return self._key

    # -- calculus -----------------------------------------------------
    def diff(self, v: Var) -> "Expr":
        """Partial derivative with respect to a single variable."""
        s = self.space
        if v not in s:
            return Expr(s, s.zero(), s.constant(1))
        i = s.index[v]
        dn = self.num.derivative(i)
        if self.den.is_constant():
            return _reduce(s, dn, self.den) if not self.den.is_one() else Expr(s, dn, self.den)
        dd = self.den.derivative(i)
        if dd.is_zero():
            return _reduce(s, dn, self.den)
        return _quotient_rule(s, self.num, self.den, dn, dd)

    def derivation(self, image: Callable[[Var], Var | None], headroom: int = 2) -> "Expr":
        """Apply the derivation sending each variable ``v`` to the variable
        ``image(v)`` (or to 0 when ``image(v)`` is None).

        Used for the total x-derivative.  Missing target variables are added
        to the space together with ``headroom`` further shifts so repeated
        application does not rebuild contexts every time.
        """
        used = self.variables()
        targets = {v: image(v) for v in used}
        need = [t for t in targets.values() if t is not None and t not in self.space]
        e = self
        if need:
            extra = []
            for t in need:
                extra.append(t)
                for k in range(1, headroom + 1):
                    extra.append(t.shifted(k))
            e = self.to_space(self.space.with_vars(extra))
        s = e.space
        gens, idx = s.gens, s.index

        def d(p):
            out = s.zero()
            if p.is_constant():
                return out
            for v, deg in zip(s.vars, p.degrees()):
                if deg and targets.get(v) is not None:
                    out += p.derivative(idx[v]) * gens[idx[targets[v]]]
            return out

        dn = d(e.num)
        if e.den.is_constant():
            if e.den.is_one():
                return Expr(s, dn, e.den)
            return _reduce(s, dn, e.den)
        dd = d(e.den)
        return _quotient_rule(s, e.num, e.den, dn, dd)

    # -- substitution -------------------------------------------------
    def relabel(self, mapping: Mapping[Var, Var]) -> "Expr":
        """Rename variables (need not be injective)."""
        used = self.variables()
        if not any(v in mapping for v in used):
            return self
        target = Space.of([mapping.get(v, v) for v in used])
        imgs = []
        for v in self.space.vars:
            w = mapping.get(v, v)
            imgs.append(target.gens[target.index[w]] if w in target else target.zero())
        return _reduce(
            target,
            self.num.compose(*imgs, ctx=target.ctx),
            self.den.compose(*imgs, ctx=target.ctx),
        )

    def subs(self, mapping: Mapping[Var, Union["Expr", Number]]) -> "Expr":
        """Substitute expressions (or numbers) for variables."""
        used = self.variables()
        mapping = {v: e for v, e in mapping.items() if v in used}
        if not mapping:
            return self
        vals = {v: e if isinstance(e, Expr) else Expr.const(e) for v, e in mapping.items()}
        target = Space.of([v for v in used if v not in vals])
        for e in vals.values():
            target = target.union(e.space)
        vals = {v: e.to_space(target) for v, e in vals.items()}
        n = _poly_subs(self.space, self.num, vals, target)
        d = _poly_subs(self.space, self.den, vals, target)
        return n / d

    def evaluate(self, point: Mapping[Var, Number]) -> Fraction:
        """Exact value at a rational point (all used variables must be given)."""
        r = self.subs(point)
        return r.constant_value()

    # -- coefficient extraction -------------------------------------
    def numerator(self) -> "Expr":
        return Expr(self.space, self.num, self.space.constant(1))

    def denominator(self) -> "Expr":
        return Expr(self.space, self.den, self.space.constant(1))

    def collect(self, vs: Iterable[Var]) -> dict[tuple[int, ...], "Expr"]:
        """Split a polynomial dependence on ``vs``: returns
        ``{exponent tuple: coefficient}`` with coefficients free of ``vs``.
        The denominator must not involve any of ``vs``."""
        vs = list(vs)
        s = self.space
        pos = [s.index[v] if v in s else None for v in vs]
        if not self.den.is_constant():
            degs = self.den.degrees()
            if any(p is not None and degs[p] for p in pos):
                raise ValueError("denominator depends on collected variables")
        buckets: dict[tuple[int, ...], dict] = {}
        for exps, c in self.num.terms():
            key = tuple(exps[p] if p is not None else 0 for p in pos)
            rest = list(exps)
            for p in pos:
                if p is not None:
                    rest[p] = 0
            buckets.setdefault(key, {})[tuple(rest)] = c
        inv_den = Expr(s, s.constant(1), self.den)
        return {
            key: Expr(s, s.ctx.from_dict(terms), s.constant(1))._mul(inv_den)
            for key, terms in buckets.items()
        }

    # -- serialisation -------------------------------------------------
    def _monic(self) -> int:
        return int(self.den.leading_coefficient())

    def _poly_terms(self, p, lc: int) -> list[tuple[Fraction, list[tuple[Var, int]]]]:
        out = []
        for exps, c in p.terms():
            mono = [(v, e) for v, e in zip(self.space.vars, exps) if e]
            out.append((Fraction(int(c), lc), mono))
        return out

    def to_text(self) -> str:
        """Canonical prefix form, e.g. ``(/ (+ (* 2 a[5,0]) (* a[2,0] a[4,0])) a[1,0])``."""
        lc = self._monic()
        num = _prefix_poly(self._poly_terms(self.num, lc))
        if self.den.is_constant():
            return num
        return f"(/ {num} {_prefix_poly(self._poly_terms(self.den, lc))})"

    def to_tree(self) -> dict:
        """Key/value export: lists of ``{"c": coefficient, "m": {var: exponent}}``."""
        lc = self._monic()

        def enc(p):
            return [
                {"c": _frac_str(c), "m": {str(v): e for v, e in mono}}
                for c, mono in self._poly_terms(p, lc)
            ]

        return {"num": enc(self.num), "den": enc(self.den)}

    def to_infix(self) -> str:
        lc = self._monic()
        num = _infix_poly(self._poly_terms(self.num, lc))
        if self.den.is_constant():
            return num
        den = _infix_poly(self._poly_terms(self.den, lc))
        return f"({num})/({den})"

    def __str__(self) -> str:
        return self.to_infix()

    def __repr__(self) -> str:
        return f"Expr({self.to_infix()})"


def _poly_subs(src: Space, p, vals: dict[Var, Expr], target: Space) -> Expr:
    """Evaluate polynomial ``p`` (in ``src``) at rational ``vals``."""
    if p.is_constant():
        return Expr.const(int(p.coefficient(0)) if not p.is_zero() else 0, target)
    if all(e.den.is_one() for e in vals.values()):
        imgs = []
        for v in src.vars:
            if v in vals:
                imgs.append(vals[v].num)
            else:
                imgs.append(target.gens[target.index[v]] if v in target else target.zero())
        return Expr(target, p.compose(*imgs, ctx=target.ctx), target.constant(1))
    # homogenise by each substituted variable's denominator
    degs = dict(zip(src.vars, p.degrees()))
    imgs_num = []
    for v in src.vars:
        if v in vals:
            imgs_num.append(None)
        else:
            imgs_num.append(target.gens[target.index[v]] if v in target else target.zero())
    pow_cache: dict[tuple[Var, int, int], object] = {}

    def power(poly, key, k):
        if k == 0:
            return target.constant(1)
        ck = (key, k)
        r = pow_cache.get(ck)
        if r is None:
            r = poly**k
            pow_cache[ck] = r
        return r

    total = target.zero()
    for exps, c in p.terms():
        t = target.constant(int(c))
        for v, e, img in zip(src.vars, exps, imgs_num):
            if v in vals:
                m = degs[v]
                val = vals[v]
                if e:
                    t *= power(val.num, (v, "n"), e)
                if m - e:
                    t *= power(val.den, (v, "d"), m - e)
            elif e:
                t *= img**e
        total += t
    den = target.constant(1)
    for v, val in vals.items():
        if degs.get(v):
            den *= val.den ** degs[v]
    return _reduce(target, total, den)


def _frac_str(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def _prefix_term(c: Fraction, mono: list[tuple[Var, int]]) -> str:
    factors = [str(v) if e == 1 else f"(^ {v} {e})" for v, e in mono]
    if not factors:
        return _frac_str(c)
    if c != 1:
        factors.insert(0, _frac_str(c))
    if len(factors) == 1:
        return factors[0]
    return "(* " + " ".join(factors) + ")"


def _prefix_poly(terms) -> str:
    if not terms:
        return "0"
    parts = [_prefix_term(c, m) for c, m in terms]
    if len(parts) == 1:
        return parts[0]
    return "(+ " + " ".join(parts) + ")"


def _infix_poly(terms) -> str:
    if not terms:
        return "0"
    out = []
    for i, (c, mono) in enumerate(terms):
        factors = [str(v) if e == 1 else f"{v}^{e}" for v, e in mono]
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        if factors:
            body = "*".join(factors) if mag == 1 else _frac_str(mag) + "*" + "*".join(factors)
        else:
            body = _frac_str(mag)
        if i == 0:
            out.append(("-" if sign == "-" else "") + body)
        else:
            out.append(f" {sign} {body}")
    return "".join(out)


# ---------------------------------------------------------------------------
# canonicalisation of expression trees and parsing


def const(c: Number) -> Expr:
    return Expr.const(c)


def var(family_or_var, index: int | None = None, order: int | None = 0) -> Expr:
    if isinstance(family_or_var, Var):
        return Expr.var(family_or_var)
    if index is None:
        return Expr.var(Var(family_or_var))
    return Expr.var(Var(family_or_var, index, order))


ZERO = Expr.const(0)
ONE = Expr.const(1)

_OPS = {"+", "-", "*", "/", "^"}


def canonicalize(tree) -> Expr:
    """Canonical form of a raw expression tree.

    Leaves are :class:`Var`, ``int``, :class:`~fractions.Fraction` or
    :class:`Expr`; inner nodes are tuples ``(op, *children)`` with ``op`` one
    of ``+ - * / ^`` (``^`` takes an integer exponent).
    """
    if isinstance(tree, Expr):
        return tree
    if isinstance(tree, Var):
        return Expr.var(tree)
    if isinstance(tree, bool):
        raise TypeError("booleans are not expressions")
    if isinstance(tree, (int, Fraction)):
        return Expr.const(tree)
    if isinstance(tree, tuple) and tree and tree[0] in _OPS:
        op, args = tree[0], tree[1:]
        if op == "^":
            base, k = args
            return canonicalize(base) ** int(k)
        vals = [canonicalize(a) for a in args]
        if op == "+":
            return _sum(vals)
        if op == "-":
            if len(vals) == 1:
                return -vals[0]
            return vals[0] - _sum(vals[1:])
        if op == "*":
            out = ONE
            for v in vals:
                out = out * v
            return out
        if op == "/":
            out = vals[0]
            for v in vals[1:]:
                out = out / v
            return out
    raise TypeError(f"malformed expression tree: {tree!r}")


def _sum(vals: list[Expr]) -> Expr:
    out = ZERO
    for v in vals:
        out = out + v
    return out


def equals_zero(e: Expr) -> bool:
    """Exact identity test; no tolerance involved."""
    return e.is_zero()


def _tokens(text: str) -> Iterator[str]:
    yield from re.findall(r"\(|\)|[^\s()]+", text)


def from_text(text: str) -> Expr:
    """Inverse of :meth:`Expr.to_text`."""
    toks = list(_tokens(text))
    pos = 0

    def read():
        nonlocal pos
        t = toks[pos]
        pos += 1
        if t == "(":
            op = toks[pos]
            pos += 1
            args = []
            while toks[pos] != ")":
                args.append(read())
            pos += 1
            if op == "^":
                return ("^", args[0], int(args[1]))
            return (op, *args)
        if re.fullmatch(r"-?\d+(/\d+)?", t):
            return Fraction(t)
        return var_from_str(t)

    tree = read()
    if pos != len(toks):
        raise ValueError("trailing tokens in expression text")
    return canonicalize(tree)


def from_tree(doc: Mapping) -> Expr:
    def dec(terms):
        out = ZERO
        for t in terms:
            mono = ONE
            for name, e in t["m"].items():
                mono = mono * Expr.var(var_from_str(name)) ** int(e)
            out = out + mono * Fraction(t["c"])
        return out

    return dec(doc["num"]) / dec(doc["den"])


def _name_to_var(name: str) -> Var:
    m = _SHORT_RE.match(name)
    if m:
        order = len(m.group(3)) if m.group(3) else 0
        return Var(m.group(1), int(m.group(2)), order)
    return Var(name)


def parse(text: str) -> Expr:
    """Parse infix input such as ``"(2*a5 + a2*a4)/a1"`` or ``"a[5,0]^2"``.

    ``a5`` is shorthand for ``a[5,0]`` and ``u1_xx`` for ``u[1,2]``; other
    bare identifiers are parameters.
    """
    tree = ast.parse(text.replace("^", "**"), mode="eval").body

    def conv(node):
        if isinstance(node, ast.BinOp):
            l, r = conv(node.left), conv(node.right)
            if isinstance(node.op, ast.Add):
                return ("+", l, r)
            if isinstance(node.op, ast.Sub):
                return ("-", l, r)
            if isinstance(node.op, ast.Mult):
                return ("*", l, r)
            if isinstance(node.op, ast.Div):
                return ("/", l, r)
            if isinstance(node.op, ast.Pow):
                if not isinstance(r, int):
                    raise ValueError("exponents must be integer literals")
                return ("^", l, r)
        elif isinstance(node, ast.UnaryOp):
            if isinstance(node.op, ast.USub):
                return ("-", conv(node.operand))
            if isinstance(node.op, ast.UAdd):
                return conv(node.operand)
        elif isinstance(node, ast.Constant) and isinstance(node.value, int):
            return node.value
        elif isinstance(node, ast.Name):
            return _name_to_var(node.id)
        elif isinstance(node, ast.Subscript) and isinstance(node.value, ast.Name):
            sl = node.slice
            elts = sl.elts if isinstance(sl, ast.Tuple) else [sl]
            idx = [ast.literal_eval(e) for e in elts]
            if len(idx) != 2:
                raise ValueError("jet variables take [index, order]")
            return Var(node.value.id, int(idx[0]), int(idx[1]))
        raise ValueError(f"unsupported syntax: {ast.dump(node)}")

    return canonicalize(conv(tree))
