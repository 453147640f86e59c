"""The concrete WDVV systems: fluxes, Lax data, Viete map and known operators.

Conventions. For N=3 the fields (a, b, c) are a[1], a[2], a[3]; the flat
coordinates are u[1..3]. For N=4 the fields are a[1..6] and the flat
coordinates are u[0..5], with u[0] = a[1] and u[5] = a[4]; u[1..4] are the
roots of the characteristic polynomial of the Lax matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

from . import linalg
from .algebra import Expr, Var, parse
from .diffop import Dx, FactorizedThirdOrder, LocalOperator, apply, mult
from .geometry import CoordinateMap, MetricCandidate
from .jet import evolutionary_derivative, jet, total_derivative, variational_derivative
from .linalg import Matrix

__all__ = [
    "HydroSystem",
    "LaxData",
    "RHO",
    "build_systems",
    "verify_commuting",
    "lax_matrix",
    "characteristic_polynomial",
    "viete_map",
    "flat_metric",
    "published_operators",
    "verify_flow",
    "DATASETS",
]

RHO = Var("rho")


def _a(i: int, k: int = 0) -> Expr:
    return jet("a", i, k)


def _m(rows: Sequence[Sequence[str | int]]) -> Matrix:
    return [[parse(x) if isinstance(x, str) else Expr.const(x) for x in row] for row in rows]


# -- hydrodynamic systems ---------------------------------------------------


@dataclass(frozen=True)
class HydroSystem:
    """Conservative system  a^i_t = (v^i(a))_x."""

    fluxes: tuple[Expr, ...]
    label: str
    family: str = "a"
    first: int = 1

    @property
    def n(self) -> int:
        return len(self.fluxes)

    def flow(self) -> list[Expr]:
        return [total_derivative(v) for v in self.fluxes]

    def flow_map(self) -> dict[tuple[str, int], Expr]:
        return {(self.family, self.first + i): f for i, f in enumerate(self.flow())}

    def in_potentials(self) -> list[Expr]:
        """Right-hand sides of b^i_t = v^i(b_x)."""
        from .jet import potential_substitution

        return [potential_substitution(v, self.family, "b") for v in self.fluxes]


def _n4_fluxes() -> tuple[list[Expr], list[Expr]]:
    a1, a2, a3, a4, a5, a6 = (_a(i) for i in range(1, 7))
    v4 = (2 * a5 + a2 * a4) / a1
    v5 = (a3 * a4 + a6) / a1
    v6 = (2 * a3 * a5 - a2 * a6) / a1
    w6 = a5**2 - a4 * a6 + (a3**2 * a4 + a3 * a6 - 2 * a2 * a3 * a5 + a2**2 * a6) / a1
    v = [a2, a4, a5, v4, v5, v6]
    w = [a3, a5, a6, v5, v6, w6]
    return v, w


def build_systems(N: int) -> list[HydroSystem]:
    if N == 3:
        a, b, c = _a(1), _a(2), _a(3)
        return [HydroSystem((b, c, b * b - a * c), "t")]
    if N == 4:
        v, w = _n4_fluxes()
        return [HydroSystem(tuple(v), "y"), HydroSystem(tuple(w), "z")]
    raise ValueError(f"unsupported N={N}; only 3 and 4 are available")


def commutator_residual(s1: HydroSystem, s2: HydroSystem) -> list[Expr]:
    """(a_y)_z - (a_z)_y componentwise, using the chain rule."""
    f1, f2 = s1.flow_map(), s2.flow_map()
    return [
        total_derivative(evolutionary_derivative(v, f2) - evolutionary_derivative(w, f1))
        for v, w in zip(s1.fluxes, s2.fluxes)
    ]


def verify_commuting(pair: Sequence[HydroSystem]) -> bool:
    s1, s2 = pair
    return all(r.is_zero() for r in commutator_residual(s1, s2))


# -- Lax data ---------------------------------------------------------------


@dataclass(frozen=True)
class LaxData:
    """psi_x = lambda A psi  with A a matrix of order-0 field expressions."""

    matrix: tuple
    N: int

    @property
    def size(self) -> int:
        return len(self.matrix)


def lax_matrix(N: int = 4) -> LaxData:
    if N == 4:
        rows = [[0, 1, 0, 0], ["a3", "a2", "a1", 0], ["a5", "a4", "a2", 1], ["a6", "a5", "a3", 0]]
    elif N == 3:
        # a 3x3 companion-type matrix whose eigenvalues are the N=3 flat coordinates
        rows = [[0, 1, 0], ["a2", "a1", 1], ["a3", "a2", 0]]
    else:
        raise ValueError(f"unsupported N={N}")
    return LaxData(tuple(tuple(r) for r in _m(rows)), N)


def characteristic_polynomial(lax: LaxData) -> Expr:
    """det(A - rho I) as an expression in the parameter ``rho``."""
    rho = Expr.var(RHO)
    n = lax.size
    m = [[lax.matrix[i][j] - (rho if i == j else 0) for j in range(n)] for i in range(n)]
    return linalg.det(m)


def viete_map(N: int = 4) -> CoordinateMap:
    """Fields a as functions of the flat coordinates u."""
    if N == 4:
        u = [jet("u", i) for i in range(6)]
        r = u[1:5]
        s1 = sum(r, Expr.const(0))
        p2 = sum((x * x for x in r), Expr.const(0))
        e3 = r[0] * r[1] * r[2] + r[0] * r[1] * r[3] + r[0] * r[2] * r[3] + r[1] * r[2] * r[3]
        e4 = r[0] * r[1] * r[2] * r[3]
        a1, a4 = u[0], u[5]
        a2 = s1 / 2
        a3 = p2 / 4 - s1 * s1 / 8 - a1 * a4 / 2
        a5 = (2 * a2 * a3 + e3) / (2 * a1)
        a6 = (a3 * a3 - e4) / a1
        return CoordinateMap("u", 0, "a", 1, (a1, a2, a3, a4, a5, a6))
    if N == 3:
        u1, u2, u3 = (jet("u", i) for i in range(1, 4))
        e1 = u1 + u2 + u3
        e2 = u1 * u2 + u1 * u3 + u2 * u3
        e3 = u1 * u2 * u3
        return CoordinateMap("u", 1, "a", 1, (e1, -e2 / 2, e3))
    raise ValueError(f"unsupported N={N}")


def flat_metric(N: int = 4) -> Matrix:
    """The constant matrix K of the first-order operator K D_x in flat coordinates."""
    if N == 4:
        return _m(
            [
                [0, 0, 0, 0, 0, -2],
                [0, 1, -1, -1, -1, 0],
                [0, -1, 1, -1, -1, 0],
                [0, -1, -1, 1, -1, 0],
                [0, -1, -1, -1, 1, 0],
                [-2, 0, 0, 0, 0, 0],
            ]
        )
    if N == 3:
        h = Fraction(1, 2)
        return linalg.matrix([[h, -h, -h], [-h, h, -h], [-h, -h, h]])
    raise ValueError(f"unsupported N={N}")


def hamiltonian_densities_flat(N: int = 4) -> dict[str, Expr]:
    """Densities in flat coordinates for the operator K D_x.

    Keys are flow labels (see ``build_systems``) plus ``"x"`` for the
    momentum when it is known in closed form.
    """
    vm = viete_map(N)
    a = dict(zip(range(1, 2 * N - 1), vm.forward))
    if N == 4:
        return {"y": a[5], "z": a[6] / 2, "x": a[3]}
    return {"t": a[3]}


def verify_flow(N: int = 4) -> dict[str, bool]:
    """K D_x grad h reproduces each flow pushed to flat coordinates."""
    vm = viete_map(N)
    K = flat_metric(N)
    n = vm.n
    op = LocalOperator.from_coefficients({1: K}, "u", vm.source_first)
    Jinv = linalg.inverse(vm.jacobian())  # d u / d a
    dens = hamiltonian_densities_flat(N)
    out = {}
    targets = {s.label: linalg.matvec(Jinv, [total_derivative(vm.pull(v)) for v in s.fluxes]) for s in build_systems(N)}
    targets["x"] = [jet("u", vm.source_first + i, 1) for i in range(n)]
    for label, h in dens.items():
        grad = [variational_derivative(h, "u", vm.source_first + i) for i in range(n)]
        got = apply(op, grad)
        out[label] = all((x - y).is_zero() for x, y in zip(got, targets[label]))
    return out


# -- published operators and data --------------------------------------------


def _assemble(grid: Sequence[Sequence[LocalOperator | int]], family: str = "a") -> LocalOperator:
    rows = []
    for row in grid:
        rows.append([{} if isinstance(e, int) else e.entries[0][0] for e in row])
    return LocalOperator(rows, family, 1)


def n3_operators() -> dict[str, LocalOperator]:
    a, b, c = _a(1), _a(2), _a(3)
    d = Dx(1)
    d2, d3 = d @ d, d @ d @ d

    def m(e):
        return mult([[e]])

    h = Fraction(1, 2)
    f = b * b - a * c
    A1 = _assemble(
        [
            [d.scale(-Fraction(3, 2)), (d @ m(a)).scale(h), d @ m(b)],
            [m(a * h) @ d, (d @ m(b) + m(b) @ d).scale(h), m(c * Fraction(3, 2)) @ d + m(_a(3, 1))],
            [m(b) @ d, (d @ m(c)).scale(Fraction(3, 2)) - m(_a(3, 1)), m(f) @ d + d @ m(f)],
        ]
    )
    A2 = _assemble(
        [
            [0, 0, d3],
            [0, d3, -(d2 @ m(a) @ d)],
            [d3, -(d @ m(a) @ d2), d2 @ m(b) @ d + d @ m(b) @ d2 + d @ m(a) @ d @ m(a) @ d],
        ]
    )
    return {"A1": A1, "A2": A2}


def n3_monge_metric() -> MetricCandidate:
    return MetricCandidate(_m([["-2*a2", "a1", 1], ["a1", 1, 0], [1, 0, 0]]), "a", 1, name="g3")


def n3_hamiltonian_b() -> Expr:
    """-1/2 a (D^-1 b)^2 - (D^-1 b)(D^-1 c) written in potentials."""
    return parse("-1/2*b1_x*b2^2 - b2*b3")


def _pqrs():
    a1, a2, a3, a4, a5, a6 = (_a(i) for i in range(1, 7))
    P = (a3 * a4 + a6) / a1
    R = (2 * a5 + a2 * a4) / a1
    S = (2 * a3 * a5 - a2 * a6) / a1
    Q = a5**2 - a4 * a6 + (a3**2 * a4 + a3 * a6 - 2 * a2 * a3 * a5 + a2**2 * a6) / a1
    return P, R, S, Q


def n4_A1() -> LocalOperator:
    """The first-order operator K D_x rewritten in the fields a."""
    a1, a2, a3, a4, a5, a6 = (_a(i) for i in range(1, 7))
    P, R, S, Q = _pqrs()
    z, one = Expr.const(0), Expr.const(1)
    M1 = [
        [z, z, z, -one, z, z],
        [z, -one, z, z, z, z],
        [a1, a2, a3, a4, a5, a6],
        [-one, z, z, z, z, z],
        [a2, a4, a5, R, P, S],
        [2 * a3, 2 * a5, 2 * a6, 2 * P, 2 * S, 2 * Q],
    ]
    M2 = [
        [z, z, a1, -one, a2, 2 * a3],
        [z, -one, a2, z, a4, 2 * a5],
        [z, z, a3, z, a5, 2 * a6],
        [-one, z, a4, z, R, 2 * P],
        [z, z, a5, z, P, 2 * S],
        [z, z, a6, z, S, 2 * Q],
    ]
    d = Dx(6)
    return mult(M1) @ d + d @ mult(M2)


def n4_K_operator() -> LocalOperator:
    return LocalOperator.from_coefficients({1: flat_metric(4)}, "u", 0)


def g6() -> MetricCandidate:
    return MetricCandidate(
        _m(
            [
                ["a4^2", "-2*a5", "2*a4", "-(a1*a4+a3)", "a2", 1],
                ["-2*a5", "-2*a3", "a2", 0, "a1", 0],
                ["2*a4", "a2", 2, "-a1", 0, 0],
                ["-(a1*a4+a3)", 0, "-a1", "a1^2", 0, 0],
                ["a2", "a1", 0, 0, 0, 0],
                [1, 0, 0, 0, 0, 0],
            ]
        ),
        "a",
        1,
        name="g6",
    )


def psi6() -> Matrix:
    """psi_i^c, row i and column c."""
    return _m(
        [
            [1, "a5", "a4", 0, 0, 0],
            [0, "a3", 0, 1, "a5", 0],
            [0, "-a2", 0, 0, "-a4", 1],
            [0, 0, "-a1", 0, "a3", 0],
            [0, "-a1", 0, 0, "-a2", 0],
            [0, 0, 0, 0, -1, 0],
        ]
    )


def phi6() -> Matrix:
    return _m(
        [
            [0, 0, 0, 0, -1, 0],
            [0, 0, 0, -1, 0, 0],
            [0, 0, 1, 0, 0, 1],
            [0, -1, 0, 0, 0, 0],
            [-1, 0, 0, 0, 0, 0],
            [0, 0, 1, 0, 0, 2],
        ]
    )


def psi6_inverse_displayed() -> Matrix:
    """The displayed inverse of psi6, in the same orientation as displayed."""
    m = _m(
        [
            ["a1", 0, 0, "a4", "a5", "a3*a4-a2*a5"],
            [0, 0, 0, 0, -1, "a2"],
            [0, 0, 0, -1, 0, "-a3"],
            [0, "a1", 0, 0, "a3", "a1*a5-a2*a3"],
            [0, 0, 0, 0, 0, "-a1"],
            [0, 0, "a1", 0, "-a2", "a2^2-a1*a4"],
        ]
    )
    a1 = _a(1)
    return [[e / a1 for e in row] for row in m]


def phi6_inverse_displayed() -> Matrix:
    return _m(
        [
            [0, 0, 0, 0, -1, 0],
            [0, 0, 0, -1, 0, 0],
            [0, 0, 2, 0, 0, -1],
            [0, -1, 0, 0, 0, 0],
            [-1, 0, 0, 0, 0, 0],
            [0, 0, -1, 0, 0, 1],
        ]
    )


def eta1() -> Matrix:
    return _m(
        [
            [0, 0, 0, 0, 0, 0],
            [1, 0, 0, 0, 0, 0],
            [0, 0, 0, 0, 0, 0],
            [0, 0, 0, 1, 0, 0],
            [0, 0, -2, 0, 0, 1],
            [0, -1, 0, 0, 0, 0],
        ]
    )


def eta2() -> Matrix:
    return _m(
        [
            [0, 0, 0, 0, 0, 0],
            [0, 0, 0, 0, 0, 0],
            [1, 0, 0, 0, 0, 0],
            [0, 0, 0, 0, 0, 0],
            [0, 0, 0, 1, 0, 0],
            [0, 0, -1, 0, 0, 1],
        ]
    )


def n4_factorized() -> FactorizedThirdOrder:
    return FactorizedThirdOrder(psi6(), phi6())


def n4_b_densities() -> dict[str, Expr]:
    """Published densities in the potentials b (a = b_x)."""
    return {
        "h1": parse("-b4*b5*b1_x - b5*b2*b2_x + b2*b4*b3_x - b2*b6"),
        "h2": parse("-b3*b5*b2_x + b4*b3*b3_x + b1*b5*b5_x - b3*b6"),
        "P": parse("-b3*b2*b2_x - b1*b3*b4_x + b1*b2*b5_x - b1*b6 - b3^2"),
        "s1": parse("b1"),
        "s2": parse("b2"),
        "s3": parse("b3"),
        "s4": parse("b4*b1_x"),
        "s5": parse("b5*b1_x + b3*b2_x"),
        "s6": parse("b5*b2_x + b3*b4_x + b6"),
    }


def published_operators(N: int) -> dict[str, object]:
    if N == 3:
        ops = n3_operators()
        ops["g"] = n3_monge_metric()
        return ops
    if N == 4:
        return {"K": n4_K_operator(), "A1": n4_A1(), "g": g6(), "A2": n4_factorized()}
    raise ValueError(f"unsupported N={N}")


def _systems_data(N: int, idx: int) -> Callable[[], HydroSystem]:
    return lambda: build_systems(N)[idx]


DATASETS: dict[str, Callable[[], object]] = {
    "n3": _systems_data(3, 0),
    "n4y": _systems_data(4, 0),
    "n4z": _systems_data(4, 1),
    "K": lambda: flat_metric(4),
    "A1a": n4_A1,
    "A2n3": lambda: n3_operators()["A2"],
    "g6": g6,
    "psi6": psi6,
    "phi6": phi6,
    "eta1": eta1,
    "eta2": eta2,
}


# operators by name, for the Schouten front end
OPERATORS: dict[str, Callable[[], LocalOperator]] = {
    "K": n4_K_operator,
    "A1": n4_A1,
    "A2": lambda: n4_factorized().operator(),
    "A1n3": lambda: n3_operators()["A1"],
    "A2n3": lambda: n3_operators()["A2"],
}

DATASETS.update(
    {
        "K3": lambda: flat_metric(3),
        "A1n3": lambda: n3_operators()["A1"],
        "g3": n3_monge_metric,
        "lax4": lambda: lax_matrix(4).matrix,
        "lax3": lambda: lax_matrix(3).matrix,
    }
)
