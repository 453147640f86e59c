import itertools

import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from conftest import sympy_zero, to_sympy
from wdvvkit import linalg, wdvv
from wdvvkit.algebra import Expr, parse
from wdvvkit.jet import jet
from wdvvkit.wdvv import (
    HydroSystem,
    RHO,
    build_systems,
    characteristic_polynomial,
    lax_matrix,
    verify_commuting,
    verify_flow,
    viete_map,
)


def test_n4_fluxes():
    y, z = build_systems(4)
    assert y.fluxes[0] == jet("a", 2)
    assert z.fluxes[0] == jet("a", 3)
    assert z.fluxes[5] == parse("a5^2 - a4*a6 + (a3^2*a4 + a3*a6 - 2*a2*a3*a5 + a2^2*a6)/a1")
    assert y.fluxes[5] == parse("(2*a3*a5 - a2*a6)/a1")


def test_n3_flux():
    (s,) = build_systems(3)
    assert s.fluxes[2] == parse("a2^2 - a1*a3")


def test_unsupported_size():
    with pytest.raises(ValueError):
        build_systems(5)


def test_n4_systems_commute():
    assert verify_commuting(build_systems(4))


def test_trivial_pair_commutes():
    y, _ = build_systems(4)
    assert verify_commuting((y, y))


def test_perturbed_pair_fails():
    y, z = build_systems(4)
    w = list(z.fluxes)
    w[5] = w[5] + jet("a", 1)
    assert not verify_commuting((y, HydroSystem(tuple(w), "z")))


def test_characteristic_polynomial_matches_display():
    cp = characteristic_polynomial(lax_matrix(4))
    want = parse("rho^4 - 2*a2*rho^3 + (a2^2 - 2*a3 - a1*a4)*rho^2 + 2*(a2*a3 - a1*a5)*rho + a3^2 - a1*a6")
    assert cp == want
    coeffs = cp.collect([RHO])
    assert coeffs[(3,)] == -2 * jet("a", 2)


def test_trace():
    m = lax_matrix(4).matrix
    assert sum((m[i][i] for i in range(4)), Expr.const(0)) == 2 * jet("a", 2)


def test_viete_numeric_point():
    vm = viete_map(4)
    pt = {jet("u", k).variables().pop(): k for k in range(1, 5)}
    pt[jet("u", 0).variables().pop()] = 1
    pt[jet("u", 5).variables().pop()] = 0
    assert vm.forward[1].evaluate(pt) == 5


@settings(max_examples=10, deadline=None)
@given(st.permutations([1, 2, 3, 4]))
def test_viete_symmetric_in_roots(perm):
    vm = viete_map(4)
    swap = {jet("u", k).variables().pop(): jet("u", perm[k - 1]) for k in range(1, 5)}
    for i in (1, 2, 4, 5):
        assert vm.forward[i].subs(swap) == vm.forward[i]


def test_characteristic_polynomial_factors_over_roots():
    vm = viete_map(4)
    cp = vm.pull(characteristic_polynomial(lax_matrix(4)))
    rho = sp.Symbol("rho")
    prod = sp.expand(sp.Mul(*[rho - sp.Symbol(f"u_{k}_0") for k in range(1, 5)]))
    assert sympy_zero(to_sympy(cp).subs(sp.Symbol("lam"), 0) - prod)


def test_n3_characteristic_polynomial_roots():
    vm = viete_map(3)
    cp = vm.pull(characteristic_polynomial(lax_matrix(3)))
    for k in (1, 2, 3):
        assert cp.subs({RHO: jet("u", k)}).is_zero()


def test_flat_metric_entries():
    K = wdvv.flat_metric(4)
    assert K[0][5] == Expr.const(-2)
    assert linalg.is_symmetric(K)


def test_flat_flows():
    assert all(verify_flow(4).values())
    assert all(verify_flow(3).values())


def test_first_order_operator_is_flat_metric_in_fields():
    vm = viete_map(4)
    A1 = wdvv.n4_A1().coefficient(1)
    J = vm.jacobian()
    pushed = linalg.matmul(linalg.matmul(J, wdvv.flat_metric(4)), linalg.transpose(J))
    assert linalg.mat_eq(pushed, [[vm.pull(e) for e in row] for row in A1])


def test_published_operator_entries():
    P, R, S, Q = wdvv._pqrs()
    assert S == parse("(2*a3*a5 - a2*a6)/a1")
    A2 = wdvv.n3_operators()["A2"]
    assert A2[0, 2] == {3: Expr.const(1)}
    assert not A2[0, 0] and not A2[0, 1]


def test_metric_factorization():
    F = wdvv.n4_factorized()
    assert linalg.mat_eq(F.metric_entries(), wdvv.g6().entries)
    inv = wdvv.psi6_inverse_displayed()
    assert linalg.mat_eq(linalg.matmul(inv, wdvv.psi6()), linalg.identity(6))
    assert linalg.mat_eq(linalg.inverse(wdvv.psi6()), inv)
    assert linalg.mat_eq(linalg.matmul(wdvv.phi6_inverse_displayed(), wdvv.phi6()), linalg.identity(6))


def test_datasets_build():
    for name, make in itertools.chain(wdvv.DATASETS.items(), wdvv.OPERATORS.items()):
        assert make() is not None, name
