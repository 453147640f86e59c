import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from conftest import sym, sympy_zero, to_sympy
from wdvvkit.algebra import Expr, Var
from wdvvkit.jet import (
    Density,
    is_trivial_density,
    jet,
    potential_substitution,
    quasi_degree,
    total_derivative,
    variational_derivative,
)
from wdvvkit.lax import expand_branch
from wdvvkit.wdvv import build_systems

JETS = [jet("u", i, k) for i in (1, 2) for k in range(3)]


@st.composite
def densities(draw):
    acc = Expr.const(0)
    for _ in range(draw(st.integers(1, 4))):
        term = Expr.const(draw(st.integers(-5, 5)))
        for v in draw(st.lists(st.sampled_from(JETS), min_size=1, max_size=3)):
            term = term * v
        acc = acc + term
    if draw(st.booleans()):
        acc = acc / (jet("u", 1) + draw(st.integers(1, 3)))
    return acc


def test_leibniz_example():
    a1, a2 = jet("a", 1), jet("a", 2)
    assert total_derivative(a1 * a2) == jet("a", 1, 1) * a2 + a1 * jet("a", 2, 1)


def test_derivative_of_constant():
    assert total_derivative(Expr.const(7)).is_zero()


def test_flux_derivative():
    s = build_systems(4)[0]
    assert s.flow()[0] == jet("a", 2, 1)


def test_explicit_x_rejected():
    h = Expr.var(Var("x")) * jet("u", 1)
    with pytest.raises(ValueError):
        is_trivial_density(h)
    with pytest.raises(ValueError):
        Density(h, "u", 1)


@settings(max_examples=40, deadline=None)
@given(densities(), densities())
def test_total_derivative_is_derivation(f, g):
    assert total_derivative(f * g) == f * total_derivative(g) + g * total_derivative(f)


@settings(max_examples=30, deadline=None)
@given(densities())
def test_total_derivative_matches_chain_rule_oracle(f):
    expr = to_sympy(f)
    want = 0
    for v in f.variables():
        want += sp.diff(expr, sym(v.family, v.index, v.order)) * sym(v.family, v.index, v.order + 1)
    assert sympy_zero(to_sympy(total_derivative(f)) - want)


def test_euler_of_ux_squared():
    assert variational_derivative(jet("u", 1, 1) ** 2, "u", 1) == -2 * jet("u", 1, 2)


@settings(max_examples=40, deadline=None)
@given(densities())
def test_euler_kills_total_derivatives(f):
    d = total_derivative(f)
    assert variational_derivative(d, "u", 1).is_zero()
    assert variational_derivative(d, "u", 2).is_zero()
    assert is_trivial_density(d)


def test_trivial_examples():
    assert is_trivial_density(total_derivative(jet("u", 1) * jet("u", 2, 1)))
    assert not is_trivial_density(jet("u", 1) * jet("u", 2, 1))


def test_n3_h0_is_log_derivative():
    u1, u2, u3 = (jet("u", i) for i in (1, 2, 3))
    f = (u1 - u2) * (u1 - u3)
    h01 = total_derivative(f) / f * Expr.const(-1) / 2
    assert is_trivial_density(h01)
    got = expand_branch(3, 1, 0, use_cache=False).h[0]
    assert Density(got, "u", 3).equivalent(h01)


def test_n4_h11_not_trivial():
    h11 = expand_branch(4, 1, 1, use_cache=False).h[1]
    assert not is_trivial_density(h11)


def test_potential_substitution():
    assert potential_substitution(jet("a", 1)) == jet("b", 1, 1)
    assert potential_substitution(Expr.const(3)) == Expr.const(3)
    a = {i: jet("a", i) for i in range(1, 7)}
    b = {i: jet("b", i, 1) for i in range(1, 7)}
    v6 = (2 * a[3] * a[5] - a[2] * a[6]) / a[1]
    assert potential_substitution(v6) == (2 * b[3] * b[5] - b[2] * b[6]) / b[1]


def test_quasi_degree():
    assert quasi_degree(jet("u", 1, 1) * jet("u", 2, 1) / jet("u", 3)) == 2
    assert quasi_degree(jet("u", 1, 1) + jet("u", 1, 2)) is None


def test_density_equivalence():
    d = Density(jet("u", 1) * jet("u", 2, 1), "u", 2)
    other = -jet("u", 1, 1) * jet("u", 2)
    assert d.equivalent(other)
    assert not d.equivalent(jet("u", 1, 1) * jet("u", 2))
