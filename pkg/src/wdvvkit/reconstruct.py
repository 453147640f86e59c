"""Factorization of a Potemin metric and the closed-form conserved quantities
of the resulting first-order structure in potentials."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from . import linalg
from .algebra import Expr, Var
from .diffop import FactorizedThirdOrder, LocalOperator, apply
from .geometry import MetricCandidate, invert_metric
from .jet import jet, potential_substitution, variational_derivative
from .linalg import Matrix

__all__ = [
    "ParallelSolution",
    "HamiltonianData",
    "ParallelSystemError",
    "ConstraintError",
    "parallel_system_residuals",
    "solve_parallel_system",
    "compute_phi",
    "casimirs",
    "momentum",
    "eta_matrices",
    "zeta",
    "hamiltonian_density",
    "constraint_suite",
    "verify_flow_b",
]


class ParallelSystemError(ValueError):
    pass


class ConstraintError(ValueError):
    pass


def parallel_system_residuals(g: MetricCandidate, psi: Sequence[Expr], ginv: Matrix | None = None) -> list[Expr]:
    """psi_{j,k} - 1/3 psi_p g^{pq} (g_{qj,k} - g_{qk,j}) for all j, k."""
    n = g.n
    ginv = ginv or invert_metric(g).entries
    x = g.coords()
    # v^q = psi_p g^{pq}
    vq = [_sum(psi[p] * ginv[p][q] for p in range(n) if not ginv[p][q].is_zero()) for q in range(n)]
    third = Fraction(1, 3)
    out = []
    for j in range(n):
        for k in range(n):
            rhs = _sum(vq[q] * (g.d(q, j, k) - g.d(q, k, j)) for q in range(n))
            out.append(psi[j].diff(x[k]) - rhs * third)
    return out


def _sum(it) -> Expr:
    acc = Expr.const(0)
    for e in it:
        acc = acc + e
    return acc


def solve_parallel_system(g: MetricCandidate) -> "ParallelSolution":
    """All solutions of the parallel system that are affine in the fields.

    The unknown constants enter as parameters; clearing denominators and
    collecting field monomials gives a linear system over Q.
    """
    n = g.n
    x = g.coords()
    unknowns = [Var(f"_c{i}") for i in range(n * n + n)]
    U = [Expr.var(v) for v in unknowns]
    psi = [_sum(U[k * n + m] * Expr.var(x[m]) for m in range(n)) + U[n * n + k] for k in range(n)]
    rows: list[list[Fraction]] = []
    for r in parallel_system_residuals(g, psi):
        if r.is_zero():
            continue
        for coeff in r.numerator().collect(x).values():
            row = [coeff.diff(u).constant_value() for u in unknowns]
            if any(row):
                rows.append(row)
    basis = linalg.nullspace(rows, len(unknowns))
    if len(basis) != n:
        raise ParallelSystemError(f"solution space has dimension {len(basis)}, expected {n}")
    cols = []
    for vec in basis:
        cols.append([_sum(Expr.const(vec[k * n + m]) * Expr.var(x[m]) for m in range(n)) + vec[n * n + k] for k in range(n)])
    P = [[cols[c][i] for c in range(n)] for i in range(n)]
    if linalg.det(P).is_zero():
        raise ParallelSystemError("solutions are not independent")
    return ParallelSolution(g, P)


def compute_phi(g: MetricCandidate, psi: Matrix) -> Matrix:
    """phi = P^{-1} g P^{-T}; must be constant and symmetric."""
    Pi = linalg.inverse(psi)
    phi = linalg.matmul(linalg.matmul(Pi, g.entries), linalg.transpose(Pi))
    for row in phi:
        for e in row:
            if not e.is_constant():
                raise ParallelSystemError("phi is not constant; psi does not factor the metric")
    if not linalg.is_symmetric(phi):
        raise ParallelSystemError("phi is not symmetric")
    return phi


@dataclass
class ParallelSolution:
    """A basis psi_i^c (row i, column c) of affine parallel covectors."""

    metric: MetricCandidate
    psi: Matrix
    _phi: Matrix | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return len(self.psi)

    @property
    def phi(self) -> Matrix:
        if self._phi is None:
            self._phi = compute_phi(self.metric, self.psi)
        return self._phi

    def factorized(self) -> FactorizedThirdOrder:
        return FactorizedThirdOrder(self.psi, self.phi, self.metric.family, self.metric.first)

    @classmethod
    def from_factorized(cls, f: FactorizedThirdOrder) -> "ParallelSolution":
        g = MetricCandidate(f.metric_entries(), f.family, f.first)
        return cls(g, f.psi, f.phi)

    def psi_lin(self) -> list:
        """psi_{km}^c as [c][k][m]."""
        return self.factorized().psi_lin()

    def omega(self) -> list:
        """omega_k^c as [c][k]."""
        return self.factorized().omega()


def _b(i: int, k: int = 0) -> Expr:
    return jet("b", i, k)


def _phi_const(sol: ParallelSolution) -> list[list[Fraction]]:
    return [[e.constant_value() for e in row] for row in sol.phi]


def _lin_const(sol: ParallelSolution):
    return [[[e.constant_value() for e in row] for row in mat] for mat in sol.psi_lin()]


def _omega_const(sol: ParallelSolution):
    return [[e.constant_value() for e in row] for row in sol.omega()]


def casimirs(sol: ParallelSolution) -> list[Expr]:
    """s^c = (1/2 psi_{mk}^c b^k_x + omega_m^c) b^m."""
    n, f = sol.n, sol.metric.first
    lin, om = _lin_const(sol), _omega_const(sol)
    out = []
    for c in range(n):
        s = Expr.const(0)
        for m in range(n):
            inner = _sum(Expr.const(lin[c][m][k] / 2) * _b(f + k, 1) for k in range(n) if lin[c][m][k]) + om[c][m]
            s = s + inner * _b(f + m)
        out.append(s)
    return out


def momentum(sol: ParallelSolution) -> Expr:
    """-(1/3 phi_{bc} omega_q^b psi_{pm}^c b^m_x + 1/2 phi_{bc} omega_p^b omega_q^c) b^p b^q."""
    n, f = sol.n, sol.metric.first
    phi, lin, om = _phi_const(sol), _lin_const(sol), _omega_const(sol)
    total = Expr.const(0)
    for p, q in itertools.product(range(n), repeat=2):
        coeff = Expr.const(0)
        for m in range(n):
            c = sum(phi[b][c] * om[b][q] * lin[c][p][m] for b in range(n) for c in range(n))
            if c:
                coeff = coeff + Expr.const(c / 3) * _b(f + m, 1)
        c0 = sum(phi[b][c] * om[b][p] * om[c][q] for b in range(n) for c in range(n))
        coeff = coeff + Fraction(c0, 2)
        if not coeff.is_zero():
            total = total + coeff * _b(f + p) * _b(f + q)
    return -total


def eta_matrices(sol: ParallelSolution, fluxes: Sequence[Expr]) -> list[list[Fraction]]:
    """eta[m][c] with psi_m^c(b_x) v^m(b_x) = eta_m^c b^m_x; errors if not linear."""
    n, fam, f = sol.n, sol.metric.family, sol.metric.first
    bx = [Var("b", f + m, 1) for m in range(n)]
    vb = [potential_substitution(v, fam, "b") for v in fluxes]
    eta = [[Fraction(0)] * n for _ in range(n)]
    for c in range(n):
        e = _sum(potential_substitution(sol.psi[m][c], fam, "b") * vb[m] for m in range(n))
        if e.is_zero():
            continue
        if not e.is_polynomial():
            raise ConstraintError("psi . v is not linear in b_x")
        rest = e
        for m in range(n):
            coef = e.diff(bx[m])
            if not coef.is_constant():
                raise ConstraintError("psi . v is not linear in b_x")
            eta[m][c] = coef.constant_value()
            rest = rest - coef * Expr.var(bx[m])
        if not rest.is_zero():
            raise ConstraintError("psi . v is not linear in b_x")
    return eta


def zeta(sol: ParallelSolution, eta: Sequence[Sequence[Fraction]], mode: str = "standard") -> list:
    """zeta[k][p][q].

    ``standard``: zeta_{kpq} = 1/3 phi_{bc}(psi_{kp}^b eta_q^c + 2 psi_{qk}^b eta_p^c).
    ``compact``: the alternative choice with fewer terms, zero when the first
    two indices agree.
    """
    n = sol.n
    phi, lin = _phi_const(sol), _lin_const(sol)

    def pe(i, j, l):  # phi_{bc} psi_{ij}^b eta_l^c
        return sum(phi[b][c] * lin[b][i][j] * eta[l][c] for b in range(n) for c in range(n))

    z = [[[Fraction(0)] * n for _ in range(n)] for _ in range(n)]
    for k, p, q in itertools.product(range(n), repeat=3):
        if mode == "standard":
            z[k][p][q] = (pe(k, p, q) + 2 * pe(q, k, p)) / 3
        elif mode == "compact":
            if k == p:
                z[k][p][q] = Fraction(0)
            elif q == k:
                z[k][p][q] = pe(k, p, k)
            elif q == p:
                z[k][p][q] = pe(p, k, p)
            else:
                z[k][p][q] = (pe(q, p, k) - pe(k, q, p)) / 3
        else:
            raise ValueError(f"unknown zeta mode {mode!r}")
    return z


def hamiltonian_density(sol: ParallelSolution, eta: Sequence[Sequence[Fraction]], mode: str = "standard") -> Expr:
    """1/2 (zeta_{pqm} b^m_x - phi_{bc} omega_p^b eta_q^c) b^p b^q."""
    bad = [name for name, res in very_constraints(sol, eta).items() if res]
    if bad:
        raise ConstraintError(f"eta violates constraints: {', '.join(bad)}")
    n, f = sol.n, sol.metric.first
    phi, om = _phi_const(sol), _omega_const(sol)
    z = zeta(sol, eta, mode)
    total = Expr.const(0)
    for p, q in itertools.product(range(n), repeat=2):
        coeff = _sum(Expr.const(z[p][q][m]) * _b(f + m, 1) for m in range(n) if z[p][q][m])
        c0 = sum(phi[b][c] * om[b][p] * eta[q][c] for b in range(n) for c in range(n))
        coeff = coeff - c0
        if not coeff.is_zero():
            total = total + coeff * _b(f + p) * _b(f + q)
    return total / 2


# -- constraints ------------------------------------------------------------


def skew_constraint(sol: ParallelSolution) -> list[tuple]:
    lin = _lin_const(sol)
    n = sol.n
    return [(c, k, m) for c, k, m in itertools.product(range(n), repeat=3) if lin[c][k][m] + lin[c][m][k] != 0]


def cyclic_constraints(sol: ParallelSolution) -> dict[str, list[tuple]]:
    """Both families of cyclic identities for psi_{km}^c and omega_k^c (with phi)."""
    n = sol.n
    phi, lin, om = _phi_const(sol), _lin_const(sol), _omega_const(sol)

    def pp(i, j, k, l):  # phi_{bc} psi_{ij}^b psi_{kl}^c
        return sum(phi[b][c] * lin[b][i][j] * lin[c][k][l] for b in range(n) for c in range(n))

    def op(i, k, l):  # phi_{bc} omega_i^b psi_{kl}^c
        return sum(phi[b][c] * om[b][i] * lin[c][k][l] for b in range(n) for c in range(n))

    left, right = [], []
    for i, j, k in itertools.product(range(n), repeat=3):
        for s in range(n):
            if pp(i, s, j, k) + pp(j, s, k, i) + pp(k, s, i, j) != 0:
                left.append((i, j, k, s))
        if op(i, j, k) + op(j, k, i) + op(k, i, j) != 0:
            right.append((i, j, k))
    return {"quadratic": left, "linear": right}


def very_constraints(sol: ParallelSolution, eta) -> dict[str, list[tuple]]:
    n = sol.n
    phi, lin, om = _phi_const(sol), _lin_const(sol), _omega_const(sol)

    def pe(i, j, l):
        return sum(phi[b][c] * lin[b][i][j] * eta[l][c] for b in range(n) for c in range(n))

    def oe(p, q):
        return sum(phi[b][c] * om[b][p] * eta[q][c] for b in range(n) for c in range(n))

    cyc = [(q, p, k) for q, p, k in itertools.product(range(n), repeat=3) if pe(q, p, k) + pe(k, q, p) + pe(p, k, q) != 0]
    sym = [(p, q) for p, q in itertools.product(range(n), repeat=2) if oe(p, q) != oe(q, p)]
    return {"cyclic": cyc, "symmetric": sym}


def constraint_suite(sol: ParallelSolution, etas: Sequence = ()) -> dict[str, bool]:
    out = {"skew": not skew_constraint(sol)}
    cyc = cyclic_constraints(sol)
    out["cyclic_psi"] = not cyc["quadratic"]
    out["cyclic_omega"] = not cyc["linear"]
    for i, eta in enumerate(etas, 1):
        v = very_constraints(sol, eta)
        out[f"eta{i}_cyclic"] = not v["cyclic"]
        out[f"eta{i}_symmetric"] = not v["symmetric"]
    return out


# -- flows in potentials ------------------------------------------------------


@dataclass
class HamiltonianData:
    eta: list
    zeta: list
    density: Expr


def b_gradient(h: Expr, n: int, first: int = 1) -> list[Expr]:
    return [variational_derivative(h, "b", first + i) for i in range(n)]


def verify_flow_b(op: LocalOperator, h: Expr, target: Sequence[Expr]) -> bool:
    """op applied to the b-gradient of h equals ``target`` exactly."""
    got = apply(op, b_gradient(h, op.n, op.first))
    return all((x - linalg.as_expr(y)).is_zero() for x, y in zip(got, target))
