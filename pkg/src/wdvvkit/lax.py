"""Conservation-law densities from the Lax pair, and the leading metric they fix.

The spectral problem is  Psi_x = lambda M Psi.  Eliminating all components but
the first gives one scalar linear equation  sum c_{l,j} lambda^l psi^{(j)} = 0,
stored as a dict {(l, j): c}.  With psi = exp(int r dx) it becomes a polynomial
equation for r, expanded as  r = lambda u^k + h_0 + h_1/lambda + ...
on the branch where the leading coefficient is the root u^k.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import linalg
from .algebra import Expr, Var, from_text
from .budget import Budget, BudgetExceeded, peak_rss_gb
from .geometry import CoordinateMap, MetricCandidate, pushforward_metric
from .jet import jet, jet_var, quasi_degree, total_derivative, variational_derivative
from .linalg import Matrix
from .wdvv import RHO, flat_metric, lax_matrix, viete_map

__all__ = [
    "LAMBDA",
    "BudgetExceeded",
    "Budget",
    "ScalarEquation",
    "BranchExpansion",
    "QuadraticFormData",
    "scalar_lax_reduction",
    "published_scalar_equation",
    "riccati_substitution",
    "leading_symbol",
    "expand_branch",
    "expand_all",
    "extract_forms",
    "reconstruct_leading_metric",
    "choose_xi",
    "DEFAULT_XI",
    "peak_rss_gb",
]

LAMBDA = Var("lambda")
DEFAULT_XI = (Fraction(1), Fraction(1, 3), Fraction(0), Fraction(1, 2))
CACHE_ENV = "WDVVKIT_CACHE"


# -- operators acting on the scalar psi ---------------------------------------

Op = dict  # {(lambda power, derivative order): Expr}


def _op_add(*ops: Op) -> Op:
    out: Op = {}
    for op in ops:
        for key, c in op.items():
            out[key] = out[key] + c if key in out else c
    return {k: v for k, v in out.items() if not v.is_zero()}


def _op_scale(op: Op, c, shift: int = 0) -> Op:
    c = c if isinstance(c, Expr) else Expr.const(c)
    if c.is_zero():
        return {}
    return {(l + shift, j): v * c for (l, j), v in op.items()}


def _op_d(op: Op) -> Op:
    """D_x composed on the left: D(c psi^(j)) = c_x psi^(j) + c psi^(j+1)."""
    parts: list[Op] = []
    for (l, j), c in op.items():
        parts.append({(l, j): total_derivative(c), (l, j + 1): c})
    return _op_add(*parts)


@dataclass(frozen=True)
class ScalarEquation:
    """sum_{l,j} lambda^l c_{l,j} psi^{(j)} = 0 with coefficients in ``family``."""

    terms: Mapping[tuple[int, int], Expr]
    family: str = "a"

    @property
    def order(self) -> int:
        return max(j for _, j in self.terms)

    @property
    def weight(self) -> int:
        """The top value of l + j (grading of the leading symbol)."""
        return max(l + j for l, j in self.terms)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ScalarEquation):
            return NotImplemented
        keys = set(self.terms) | set(other.terms)
        zero = Expr.const(0)
        return all(self.terms.get(k, zero) == other.terms.get(k, zero) for k in keys)

    __hash__ = None

    def at_lambda_zero(self) -> "ScalarEquation":
        return ScalarEquation({k: v for k, v in self.terms.items() if k[0] == 0}, self.family)

    def to_expr(self, psi: str = "psi") -> Expr:
        lam = Expr.var(LAMBDA)
        acc = Expr.const(0)
        for (l, j), c in sorted(self.terms.items()):
            acc = acc + c * lam**l * jet(psi, 0, j)
        return acc

    def pulled(self, cmap: CoordinateMap) -> "ScalarEquation":
        return ScalarEquation({k: cmap.pull_jet(v) for k, v in self.terms.items()}, cmap.source)


def scalar_lax_reduction(N: int = 4, matrix: Matrix | None = None) -> ScalarEquation:
    """Eliminate psi_1 .. psi_{n-1} from  Psi_x = lambda M Psi.

    Row j is solved for component j+1, so M must vanish right of the
    superdiagonal with a nonzero superdiagonal entry. The last row gives the
    equation, multiplied by lambda^(n-1) to clear negative powers.
    """
    M = linalg.matrix(matrix) if matrix is not None else [list(r) for r in lax_matrix(N).matrix]
    n = len(M)
    comps: list[Op] = [{(0, 0): Expr.const(1)}]
    for j in range(n - 1):
        if any(not M[j][k].is_zero() for k in range(j + 2, n)) or M[j][j + 1].is_zero():
            raise ValueError("Lax matrix is not of the eliminable shape")
        rest = _op_add(*[_op_scale(comps[k], M[j][k]) for k in range(j + 1)])
        nxt = _op_add(_op_scale(_op_d(comps[j]), 1, -1), _op_scale(rest, -1))
        comps.append(_op_scale(nxt, M[j][j + 1].inverse()))
    last = _op_add(*[_op_scale(comps[k], M[n - 1][k], 1) for k in range(n)])
    eq = _op_add(last, _op_scale(_op_d(comps[n - 1]), -1))
    eq = _op_scale(eq, 1, n - 1)
    if any(l < 0 for l, _ in eq):
        raise ArithmeticError("negative lambda power survived elimination")
    return ScalarEquation(eq, "a")


def published_scalar_equation() -> ScalarEquation:
    """The N=4 scalar equation as displayed in the literature, LHS - RHS."""
    a = {i: jet("a", i) for i in range(1, 7)}
    a1i = a[1].inverse()
    lhs = {
        (2, 2): a[3] * a1i,
        (3, 1): a[5] - a[2] * a[3] * a1i,
        (4, 0): a[6] - a[3] ** 2 * a1i,
    }
    inner2 = {(0, 2): a1i, (1, 1): -a[2] * a1i, (2, 0): -a[3] * a1i}
    inner1 = {
        (3, 0): a[2] * a[3] * a1i - a[5],
        (2, 1): a[2] ** 2 * a1i - a[4],
        (1, 2): -a[2] * a1i,
    }
    rhs = _op_add(_op_d(_op_d(inner2)), _op_d(inner1))
    return ScalarEquation(_op_add(lhs, _op_scale(rhs, -1)), "a")


def leading_symbol(eq: ScalarEquation) -> Expr:
    """sum over l + j = weight of c_{l,j} rho^j."""
    w = eq.weight
    rho = Expr.var(RHO)
    acc = Expr.const(0)
    for (l, j), c in eq.terms.items():
        if l + j == w:
            acc = acc + c * rho**j
    return acc


# -- Riccati substitution -------------------------------------------------------


def _bell(k: int, r: str = "r") -> list[Expr]:
    """B_0..B_k with psi^(j) = B_j psi for psi = exp int r: B_{j+1} = D B_j + r B_j."""
    out = [Expr.const(1)]
    rv = jet(r, 0)
    for _ in range(k):
        out.append(total_derivative(out[-1]) + rv * out[-1])
    return out


def riccati_substitution(eq: ScalarEquation, r: str = "r") -> Expr:
    """The equation divided by psi, as a polynomial in lambda and jets of r."""
    B = _bell(eq.order, r)
    lam = Expr.var(LAMBDA)
    acc = Expr.const(0)
    for (l, j), c in eq.terms.items():
        acc = acc + c * lam**l * B[j]
    return acc


# -- truncated Laurent series in lambda --------------------------------------

Series = dict  # {power: Expr}


def _s_mul(x: Series, y: Series, floor: int) -> Series:
    out: Series = {}
    for p, a in x.items():
        for q, b in y.items():
            if p + q < floor:
                continue
            t = a * b
            out[p + q] = out[p + q] + t if p + q in out else t
    return {k: v for k, v in out.items() if not v.is_zero()}


def _s_d(x: Series) -> Series:
    out = {p: total_derivative(v) for p, v in x.items()}
    return {k: v for k, v in out.items() if not v.is_zero()}


def _s_add(x: Series, y: Series) -> Series:
    out = dict(x)
    for p, v in y.items():
        out[p] = out[p] + v if p in out else v
    return {k: v for k, v in out.items() if not v.is_zero()}


def _evaluate_at(eq: ScalarEquation, r: Series, target: int, budget: Budget | None) -> Expr:
    """Coefficient of lambda^target in sum c_{l,j} lambda^l B_j(r)."""
    J = eq.order
    lmax = {j: max((l for l, jj in eq.terms if jj == j), default=None) for j in range(J + 1)}
    need = [0] * (J + 1)
    nxt = None
    for j in range(J, -1, -1):
        own = target - lmax[j] if lmax[j] is not None else None
        cands = [v for v in (own, None if nxt is None else nxt - 1) if v is not None]
        need[j] = min(cands) if cands else target
        nxt = need[j]
    B: Series = {0: Expr.const(1)}
    acc = Expr.const(0)
    for j in range(J + 1):
        if j:
            B = _s_add(_s_d(B), _s_mul(r, B, need[j]))
            B = {p: v for p, v in B.items() if p >= need[j]}
            if budget:
                budget.check(f"at B_{j}")
        for (l, jj), c in eq.terms.items():
            if jj == j and (target - l) in B:
                acc = acc + c * B[target - l]
    return acc


@dataclass
class BranchExpansion:
    """r = lambda u^k + h_0 + h_1/lambda + ... on branch k, in flat coordinates."""

    N: int
    branch: int
    h: list[Expr]  # h[i] = h_i, starting from h_0
    family: str = "u"
    first: int = 1
    n: int = 0
    elapsed: float = 0.0

    @property
    def depth(self) -> int:
        return len(self.h) - 1

    @property
    def leading(self) -> Expr:
        return jet(self.family, self.branch)

    def density(self, i: int) -> Expr:
        return self.leading if i == -1 else self.h[i]

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "branch": self.branch,
            "family": self.family,
            "first": self.first,
            "n": self.n,
            "h": [e.to_text() for e in self.h],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BranchExpansion":
        return cls(d["N"], d["branch"], [from_text(t) for t in d["h"]], d["family"], d["first"], d["n"])


def flat_equation(N: int) -> tuple[ScalarEquation, CoordinateMap]:
    vm = viete_map(N)
    return scalar_lax_reduction(N).pulled(vm), vm


def _branches(N: int) -> range:
    return range(1, N + 1)


def cache_dir() -> Path | None:
    d = os.environ.get(CACHE_ENV)
    return Path(d) if d else None


def _cache_file(N: int, branch: int, depth: int) -> Path | None:
    d = cache_dir()
    if d is None:
        return None
    key = hashlib.sha256(f"lax-expansion/v1/N={N}/k={branch}/depth={depth}".encode()).hexdigest()[:16]
    return d / "expansions" / f"N{N}_k{branch}_d{depth}_{key}.json"


def expand_branch(
    N: int,
    branch: int,
    depth: int,
    budget: Budget | None = None,
    use_cache: bool = True,
) -> BranchExpansion:
    """Solve for h_0 .. h_depth on branch ``branch`` (1-based root index).

    At order lambda^(w-1-i) the unknown h_i enters only through
    h_i * dP/drho(u^k), P the leading symbol, so each step is one division.
    """
    if branch not in _branches(N):
        raise ValueError(f"branch must be in 1..{N}, got {branch}")
    if depth < 0:
        raise ValueError("depth must be >= 0")
    path = _cache_file(N, branch, depth) if use_cache else None
    if path is not None and path.exists():
        return BranchExpansion.from_dict(json.loads(path.read_text()))
    t0 = time.perf_counter()
    eq, vm = flat_equation(N)
    uk = jet("u", branch)
    sym = leading_symbol(eq)
    if not sym.subs({RHO: uk}).is_zero():
        raise ArithmeticError(f"u{branch} is not a root of the leading symbol")
    slope = sym.diff(RHO).subs({RHO: uk})
    if slope.is_zero():
        raise ArithmeticError("repeated root on this branch")
    w = eq.weight
    r: Series = {1: uk}
    hs: list[Expr] = []
    for i in range(depth + 1):
        rest = _evaluate_at(eq, r, w - 1 - i, budget)
        hi = -rest / slope
        hs.append(hi)
        if not hi.is_zero():
            r[-i] = hi
        if budget:
            budget.check(f"after h_{i} on branch {branch}")
    exp = BranchExpansion(N, branch, hs, "u", vm.source_first, vm.n, time.perf_counter() - t0)
    if path is not None:
        _write_atomic(path, json.dumps(exp.to_dict(), sort_keys=True))
    return exp


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def _expand_job(args):
    N, k, depth, seconds, mem = args
    budget = Budget(seconds, mem) if (seconds or mem) else None
    return expand_branch(N, k, depth, budget).to_dict()


def expand_all(
    N: int,
    depth: int,
    budget: Budget | None = None,
    workers: int = 1,
) -> list[BranchExpansion]:
    """All branches; with workers > 1 the branches run in separate processes."""
    ks = list(_branches(N))
    if workers <= 1:
        return [expand_branch(N, k, depth, budget) for k in ks]
    secs = budget.seconds if budget else None
    mem = budget.mem_gb if budget else None
    with ProcessPoolExecutor(max_workers=workers) as pool:
        res = list(pool.map(_expand_job, [(N, k, depth, secs, mem) for k in ks]))
    return [BranchExpansion.from_dict(d) for d in res]


# -- quadratic and quartic forms ------------------------------------------------


@dataclass
class QuadraticFormData:
    """G[k][s][m] from h_1k = -1/2 G_ksm u^s_x u^m_x; Q[k][m][s] from h_3k if known."""

    G: list[Matrix]
    Q: list[Matrix] | None
    family: str = "u"
    first: int = 1

    @property
    def n(self) -> int:
        return len(self.G[0])

    def combined(self, xi: Sequence) -> Matrix:
        n = self.n
        return [
            [sum((self.G[m][p][q] * Fraction(x) for m, x in enumerate(xi) if x), Expr.const(0)) for q in range(n)]
            for p in range(n)
        ]

    def rebuild_h1(self, k: int) -> Expr:
        """-1/2 G_ksm u^s_x u^m_x for branch index k (0-based)."""
        n = self.n
        ux = [jet(self.family, self.first + i, 1) for i in range(n)]
        acc = Expr.const(0)
        for s in range(n):
            for m in range(n):
                if not self.G[k][s][m].is_zero():
                    acc = acc + self.G[k][s][m] * ux[s] * ux[m]
        return acc * Fraction(-1, 2)


def _leading_block(h: Expr, family: str, first: int, n: int, order: int, degree: int, scale) -> Matrix:
    """d E_j(h) / d u^m_(order): the coefficient of the highest derivative in
    the Euler derivative, which only sees h modulo total derivatives."""
    deg = quasi_degree(h)
    if deg is not None and deg != degree:
        raise ValueError(f"density has quasi-degree {deg}, expected {degree}")
    if deg is None and not h.is_zero():
        raise ValueError("density is not quasi-homogeneous")
    out = []
    for j in range(n):
        e = variational_derivative(h, family, first + j)
        out.append([e.diff(jet_var(family, first + m, order)) * scale for m in range(n)])
    return out


def extract_forms(exps: Sequence[BranchExpansion], with_quartic: bool = True) -> QuadraticFormData:
    """G from h_1 of each branch; Q^(1) from h_3 when the expansions reach it."""
    e0 = exps[0]
    fam, first, n = e0.family, e0.first, e0.n
    G = [_leading_block(e.h[1], fam, first, n, 2, 2, 1) for e in exps]
    Q = None
    if with_quartic and all(e.depth >= 3 for e in exps):
        Q = [_leading_block(e.h[3], fam, first, n, 4, 4, Fraction(1, 2)) for e in exps]
    for blk in G + (Q or []):
        if not linalg.is_symmetric(blk):
            raise ArithmeticError("extracted form is not symmetric")
    return QuadraticFormData(G, Q, fam, first)


# -- leading metric -------------------------------------------------------------


def _xi_candidates(m: int) -> Iterable[tuple[Fraction, ...]]:
    vals = sorted(
        {Fraction(p, q) for q in range(1, 7) for p in range(-2 * q, 2 * q + 1)},
        key=lambda f: (abs(f.numerator) + f.denominator, f < 0, f),
    )
    small = [v for v in vals if abs(v.numerator) + v.denominator <= 4]
    for combo in itertools.product(small, repeat=m):
        if any(combo):
            yield combo
    for combo in itertools.product(vals, repeat=m):
        yield combo


def _random_point(e_vars: Iterable[Var], seed: int = 7) -> dict:
    import random

    rng = random.Random(seed)
    return {v: Fraction(rng.randint(-40, 40), rng.randint(1, 9)) for v in e_vars}


def _nonsingular(mat: Matrix) -> bool:
    # cheap numeric screen first, exact determinant only if the screen is inconclusive
    vs = set().union(*(e.variables() for row in mat for e in row))
    for seed in (7, 11):
        pt = _random_point(sorted(vs, key=Var.sort_key), seed)
        try:
            num = [[Fraction(e.evaluate(pt)) for e in row] for row in mat]
        except ZeroDivisionError:
            continue
        if linalg.rank(num) == len(mat):
            return True
    return not linalg.det(mat).is_zero()


def choose_xi(forms: QuadraticFormData, preferred: Sequence | None = None) -> tuple[Fraction, ...]:
    """``preferred`` if it gives a nondegenerate combination, else the first
    small-rational vector in [-2, 2] (denominators up to 6) that does."""
    m = len(forms.G)
    if preferred is not None:
        xi = tuple(Fraction(x) for x in preferred)
        if len(xi) == m and _nonsingular(forms.combined(xi)):
            return xi
    for xi in _xi_candidates(m):
        if _nonsingular(forms.combined(xi)):
            return xi
    raise ArithmeticError("no nondegenerate combination of the quadratic forms")


def reconstruct_leading_metric(
    forms: QuadraticFormData,
    K: Matrix,
    xi: Sequence,
    recursion_constant=1,
) -> MetricCandidate:
    """g^{ij} = 2 xi^m K^{ip} Q_{mpq} C^{qj}, C the inverse of xi^m G_m.

    The formula assumes  A_1 dH_3k = kappa A_2 dH_1k  with kappa = 1; another
    known ``recursion_constant`` kappa divides the result.
    """
    if forms.Q is None:
        raise ValueError("quartic forms are required")
    xi = tuple(Fraction(x) for x in xi)
    if len(xi) != len(forms.G):
        raise ValueError(f"xi needs {len(forms.G)} entries")
    if not any(xi):
        raise ValueError("xi = 0 is degenerate")
    Gt = forms.combined(xi)
    try:
        C = linalg.inverse(Gt)
    except linalg.SingularMatrixError:
        raise ValueError("degenerate xi combination") from None
    n = forms.n
    Qt = [
        [sum((forms.Q[m][p][q] * x for m, x in enumerate(xi) if x), Expr.const(0)) for q in range(n)]
        for p in range(n)
    ]
    K = linalg.matrix(K)
    g = linalg.matmul(linalg.matmul(K, Qt), C)
    kappa = Fraction(recursion_constant)
    if kappa == 0:
        raise ValueError("recursion constant must be nonzero")
    g = [[e * (2 / kappa) for e in row] for row in g]
    return MetricCandidate(g, forms.family, forms.first, contravariant=True, name="reconstructed")


def reconstruct_in_casimirs(
    N: int, depth_data: Sequence[BranchExpansion], xi=None, recursion_constant=1
) -> tuple[Matrix, MetricCandidate]:
    """The reconstructed contravariant metric pushed to the a-coordinates.

    Entries stay written in u, since the inverse of the Viete map involves
    radicals; compare them with a pulled-back target.
    """
    forms = extract_forms(depth_data)
    xi = choose_xi(forms, xi if xi is not None else (DEFAULT_XI if N == 4 else None))
    g = reconstruct_leading_metric(forms, flat_metric(N), xi, recursion_constant)
    return pushforward_metric(g, viete_map(N)).entries, g
