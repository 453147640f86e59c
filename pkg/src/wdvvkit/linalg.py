"""Small exact linear algebra: matrices of expressions and rational RREF."""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

from .algebra import Expr, Number

Matrix = list[list[Expr]]


def as_expr(x: Expr | Number) -> Expr:
    return x if isinstance(x, Expr) else Expr.const(x)


def matrix(rows: Sequence[Sequence[Expr | Number]]) -> Matrix:
    return [[as_expr(x) for x in row] for row in rows]


def identity(n: int) -> Matrix:
    return [[Expr.const(int(i == j)) for j in range(n)] for i in range(n)]


def zeros(n: int, m: int | None = None) -> Matrix:
    return [[Expr.const(0) for _ in range(n if m is None else m)] for _ in range(n)]


def transpose(m: Matrix) -> Matrix:
    return [list(col) for col in zip(*m)]


def matmul(a: Matrix, b: Matrix) -> Matrix:
    bt = transpose(b)
    out = []
    for row in a:
        out_row = []
        for col in bt:
            acc = Expr.const(0)
            for x, y in zip(row, col):
                if not x.is_zero() and not y.is_zero():
                    acc = acc + x * y
            out_row.append(acc)
        out.append(out_row)
    return out


def matvec(a: Matrix, v: Sequence[Expr]) -> list[Expr]:
    out = []
    for row in a:
        acc = Expr.const(0)
        for x, y in zip(row, v):
            if not x.is_zero() and not y.is_zero():
                acc = acc + x * y
        out.append(acc)
    return out


def mat_eq(a: Matrix, b: Matrix) -> bool:
    return len(a) == len(b) and all(
        len(ra) == len(rb) and all(x == y for x, y in zip(ra, rb)) for ra, rb in zip(a, b)
    )


def is_symmetric(m: Matrix) -> bool:
    n = len(m)
    return all(m[i][j] == m[j][i] for i in range(n) for j in range(i + 1, n))


def _pivot(rows: Matrix, col: int, start: int) -> int | None:
    best, best_size = None, None
    for r in range(start, len(rows)):
        e = rows[r][col]
        if not e.is_zero():
            size = e.n_terms()
            if best is None or size < best_size:
                best, best_size = r, size
    return best


def det(m: Matrix) -> Expr:
    """Determinant by Gaussian elimination over the rational-function field."""
    a = [row[:] for row in m]
    n = len(a)
    result = Expr.const(1)
    for c in range(n):
        p = _pivot(a, c, c)
        if p is None:
            return Expr.const(0)
        if p != c:
            a[c], a[p] = a[p], a[c]
            result = -result
        piv = a[c][c]
        result = result * piv
        inv = piv.inverse()
        for r in range(c + 1, n):
            if a[r][c].is_zero():
                continue
            f = a[r][c] * inv
            a[r] = [x - f * y if j >= c else x for j, (x, y) in enumerate(zip(a[r], a[c]))]
    return result


class SingularMatrixError(ArithmeticError):
    pass


def inverse(m: Matrix) -> Matrix:
    """Exact inverse by Gauss-Jordan elimination."""
    n = len(m)
    a = [row[:] + ident for row, ident in zip(m, identity(n))]
    for c in range(n):
        p = _pivot(a, c, c)
        if p is None:
            raise SingularMatrixError("matrix is singular")
        a[c], a[p] = a[p], a[c]
        inv = a[c][c].inverse()
        a[c] = [x * inv for x in a[c]]
        for r in range(n):
            if r != c and not a[r][c].is_zero():
                f = a[r][c]
                a[r] = [x - f * y for x, y in zip(a[r], a[c])]
    return [row[n:] for row in a]


# -- exact linear systems over Q ------------------------------------------


def rref(rows: list[list[Fraction]]) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form over Q; returns (matrix, pivot columns)."""
    a = [[Fraction(x) for x in row] for row in rows]
    if not a:
        return a, []
    ncols = len(a[0])
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        p = next((i for i in range(r, len(a)) if a[i][c] != 0), None)
        if p is None:
            continue
        a[r], a[p] = a[p], a[r]
        pv = a[r][c]
        a[r] = [x / pv for x in a[r]]
        for i in range(len(a)):
            if i != r and a[i][c] != 0:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
        if r == len(a):
            break
    return a[:r], pivots


def nullspace(rows: list[list[Fraction]], ncols: int) -> list[list[Fraction]]:
    """Basis of {x : rows . x = 0}."""
    red, pivots = rref(rows) if rows else ([], [])
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for f in free:
        x = [Fraction(0)] * ncols
        x[f] = Fraction(1)
        for row, pc in zip(red, pivots):
            x[pc] = -row[f]
        basis.append(x)
    return basis


def rank(rows: list[list[Fraction]]) -> int:
    return len(rref(rows)[1]) if rows else 0
