import itertools

import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from conftest import sym, sympy_zero, to_sympy
from wdvvkit import linalg, wdvv
from wdvvkit.algebra import Expr
from wdvvkit.geometry import (
    CoordinateMap,
    MetricCandidate,
    SingularMetricError,
    christoffel,
    curvature,
    invert_metric,
    metric_det,
    pushforward_metric,
)
from wdvvkit.jet import jet

a1, a2, a3 = (jet("a", i) for i in (1, 2, 3))


def _curved():
    return MetricCandidate([[a2, 0, a1], [0, 1, 0], [a1, 0, a3 + 1]])


@pytest.fixture(scope="module")
def g6_report():
    return curvature(wdvv.g6())


def test_constant_metric_flat():
    rep = curvature(MetricCandidate([[1, 2], [2, 5]]))
    assert rep.riemann_is_zero() and rep.scalar.is_zero()
    assert all(e.is_zero() for e in itertools.chain.from_iterable(itertools.chain.from_iterable(rep.christoffel)))


def test_n3_monge_metric_flat():
    assert curvature(wdvv.n3_monge_metric()).riemann_is_zero()


def test_g6_curvature(g6_report):
    assert not g6_report.riemann_is_zero()
    assert g6_report.scalar.is_zero()
    assert not g6_report.weyl_is_zero()


def test_singular_metric_rejected():
    with pytest.raises(SingularMetricError):
        invert_metric(MetricCandidate([[a1, a1], [a1, a1]]))
    with pytest.raises(ValueError):
        MetricCandidate([[1, 0]])


def test_riemann_matches_sympy_oracle():
    g = _curved()
    rep = curvature(g)
    X = [sym("a", i, 0) for i in (1, 2, 3)]
    G = sp.Matrix(3, 3, lambda i, j: to_sympy(g.entries[i][j]))
    Gi = G.inv()
    n = 3
    gam = [[[sum(Gi[i, l] * (sp.diff(G[l, j], X[k]) + sp.diff(G[l, k], X[j]) - sp.diff(G[j, k], X[l])) for l in range(n)) / 2
             for k in range(n)] for j in range(n)] for i in range(n)]
    for i, j, k, l in itertools.product(range(n), repeat=4):
        want = sp.diff(gam[i][l][j], X[k]) - sp.diff(gam[i][k][j], X[l])
        want += sum(gam[i][k][m] * gam[m][l][j] - gam[i][l][m] * gam[m][k][j] for m in range(n))
        assert sympy_zero(to_sympy(rep.riemann[i][j][k][l]) - want)


def test_riemann_symmetries_and_bianchi():
    rep = curvature(_curved())
    R = rep.riemann_lower
    n = 3
    for i, j, k, l in itertools.product(range(n), repeat=4):
        assert (R[i][j][k][l] + R[j][i][k][l]).is_zero()
        assert (R[i][j][k][l] + R[i][j][l][k]).is_zero()
        assert R[i][j][k][l] == R[k][l][i][j]
        assert (R[i][j][k][l] + R[i][k][l][j] + R[i][l][j][k]).is_zero()


def test_christoffel_requires_covariant():
    g = MetricCandidate([[1, 0], [0, 1]], contravariant=True)
    with pytest.raises(ValueError):
        christoffel(g)


def test_identity_pushforward():
    g = _curved()
    idmap = CoordinateMap("a", 1, "a", 1, (a1, a2, a3), (a1, a2, a3))
    assert pushforward_metric(g, idmap) == g


def test_linear_pushforward():
    J = [[1, 2], [0, 1]]
    x1, x2 = jet("a", 1), jet("a", 2)
    c = CoordinateMap("a", 1, "c", 1, (x1 + 2 * x2, x2), (jet("c", 1) - 2 * jet("c", 2), jet("c", 2)))
    up = MetricCandidate([[1, 0], [0, 3]], contravariant=True)
    got = pushforward_metric(up, c)
    assert linalg.mat_eq(got.entries, linalg.matmul(linalg.matmul(linalg.matrix(J), up.entries), linalg.transpose(linalg.matrix(J))))
    down = MetricCandidate([[1, 0], [0, 3]])
    Ji = linalg.inverse(linalg.matrix(J))
    got = pushforward_metric(down, c)
    assert linalg.mat_eq(got.entries, linalg.matmul(linalg.matmul(linalg.transpose(Ji), down.entries), Ji))


@settings(max_examples=15, deadline=None)
@given(st.integers(-3, 3), st.integers(-3, 3), st.booleans())
def test_pushforward_functorial(s, t, contra):
    c1, c2 = jet("c", 1), jet("c", 2)
    e1, e2 = jet("e", 1), jet("e", 2)
    m1 = CoordinateMap("a", 1, "c", 1, (a1, a2 + s * a1**2), (c1, c2 - s * c1**2))
    m2 = CoordinateMap("c", 1, "e", 1, (c1 + t * c2, c2), (e1 - t * e2, e2))
    g = MetricCandidate([[a2**2 + 1, a1], [a1, 2]], contravariant=contra)
    two = pushforward_metric(pushforward_metric(g, m1), m2)
    one = pushforward_metric(g, m1.then(m2))
    assert two == one
    assert two.contravariant == contra


def test_pushforward_preserves_flatness():
    m = CoordinateMap("a", 1, "c", 1, (a1, a2 + a1**2), (jet("c", 1), jet("c", 2) - jet("c", 1) ** 2))
    g = pushforward_metric(MetricCandidate([[1, 0], [0, 1]]), m)
    assert not all(e.is_constant() for row in g.entries for e in row)
    assert curvature(g).riemann_is_zero()


def test_viete_pushforward_of_flat_metric():
    # K D_x in flat coordinates becomes the known first-order N=3 operator
    vm = wdvv.viete_map(3)
    K = MetricCandidate(wdvv.flat_metric(3), "u", 1, contravariant=True)
    pushed = pushforward_metric(K, vm).entries
    A1 = wdvv.n3_operators()["A1"].coefficient(1)
    assert linalg.mat_eq(pushed, [[vm.pull(e) for e in row] for row in A1])


def test_inverse_identities():
    g = _curved()
    gi = invert_metric(g)
    assert gi.contravariant
    assert linalg.mat_eq(linalg.matmul(g.entries, gi.entries), linalg.identity(3))
    assert invert_metric(gi) == g
    assert metric_det(g) * metric_det(gi) == Expr.const(1)


def test_report_listing_is_text():
    rep = curvature(_curved())
    d = rep.nonzero()
    assert d["riemann"] and all(isinstance(x["value"], str) for x in d["riemann"])
