import json
from fractions import Fraction

import pytest
import sympy as sp

from conftest import sympy_zero, to_sympy
from wdvvkit import linalg, wdvv
from wdvvkit.algebra import Expr
from wdvvkit.budget import Budget, BudgetExceeded
from wdvvkit.checks import reconstruction_target
from wdvvkit.diffop import apply
from wdvvkit.geometry import pushforward_metric
from wdvvkit.jet import (
    evolutionary_derivative,
    is_trivial_density,
    jet,
    total_derivative,
    variational_derivative,
)
from wdvvkit.lax import (
    BranchExpansion,
    LAMBDA,
    expand_branch,
    extract_forms,
    flat_equation,
    leading_symbol,
    published_scalar_equation,
    reconstruct_leading_metric,
    riccati_substitution,
    scalar_lax_reduction,
)


@pytest.fixture(scope="module")
def n3_exps():
    return [expand_branch(3, k, 3, use_cache=False) for k in (1, 2, 3)]


@pytest.fixture(scope="module")
def n4_exps():
    return [expand_branch(4, k, 1, use_cache=False) for k in range(1, 5)]


def _elimination_oracle():
    """Independent sympy elimination of psi_2..psi_4 for the N=4 Lax pair."""
    x, lam = sp.symbols("x lam")
    a = {i: sp.Function(f"A{i}")(x) for i in range(1, 7)}
    p1 = sp.Function("P")(x)
    p2 = sp.diff(p1, x) / lam
    p3 = (sp.diff(p2, x) / lam - a[3] * p1 - a[2] * p2) / a[1]
    p4 = sp.diff(p3, x) / lam - a[5] * p1 - a[4] * p2 - a[2] * p3
    eq = lam**3 * (lam * (a[6] * p1 + a[5] * p2 + a[3] * p3) - sp.diff(p4, x))
    eq = sp.expand(eq)
    subs = {}
    for k in range(6, -1, -1):
        subs[sp.diff(p1, x, k)] = sp.Symbol(f"psi_0_{k}")
        for i in range(1, 7):
            subs[sp.diff(a[i], x, k)] = sp.Symbol(f"a_{i}_{k}")
    for k in range(6, -1, -1):
        eq = eq.subs(sp.diff(p1, x, k), subs[sp.diff(p1, x, k)])
        for i in range(1, 7):
            eq = eq.subs(sp.diff(a[i], x, k), subs[sp.diff(a[i], x, k)])
    return eq


def test_scalar_equation_matches_elimination_oracle():
    ours = to_sympy(scalar_lax_reduction(4).to_expr())
    assert sympy_zero(ours - _elimination_oracle())


def test_scalar_equation_matches_display():
    assert scalar_lax_reduction(4) == published_scalar_equation()


def test_lambda_zero_part():
    eq = scalar_lax_reduction(4).at_lambda_zero().to_expr()
    inner = jet("psi", 0, 2) / jet("a", 1)
    assert eq == -total_derivative(total_derivative(inner))


def test_leading_symbol_is_characteristic_polynomial():
    sym = leading_symbol(scalar_lax_reduction(4))
    cp = wdvv.characteristic_polynomial(wdvv.lax_matrix(4))
    assert sym / cp == -1 / jet("a", 1)
    sym3 = leading_symbol(scalar_lax_reduction(3))
    cp3 = wdvv.characteristic_polynomial(wdvv.lax_matrix(3))
    assert (sym3 / cp3).constant_value() is not None


def test_leading_symbol_roots_are_flat_coordinates():
    eq, vm = flat_equation(4)
    sym = leading_symbol(eq)
    for k in range(1, 5):
        assert sym.subs({wdvv.RHO: jet("u", k)}).is_zero()


def test_riccati_substitution_derivatives():
    from wdvvkit.lax import _bell

    B = _bell(3)
    r = jet("r", 0)
    assert B[1] == r
    assert B[2] == jet("r", 0, 1) + r * r
    assert B[3] == total_derivative(B[2]) + r * B[2]


def test_riccati_of_simple_equation():
    from wdvvkit.lax import ScalarEquation

    eq = ScalarEquation({(0, 2): Expr.const(1), (2, 0): Expr.const(-1)}, "a")
    got = riccati_substitution(eq)
    lam = Expr.var(LAMBDA)
    assert got == jet("r", 0, 1) + jet("r", 0) ** 2 - lam**2


def test_expansion_solves_truncated_equation(n3_exps):
    # substituting the truncated series leaves only powers below the solved range
    from wdvvkit.lax import _evaluate_at

    eq, _ = flat_equation(3)
    e = n3_exps[0]
    r = {1: e.leading}
    for i, h in enumerate(e.h):
        if not h.is_zero():
            r[-i] = h
    w = eq.weight
    for i in range(e.depth + 1):
        assert _evaluate_at(eq, r, w - 1 - i, None).is_zero()


def test_h0_trivial(n3_exps, n4_exps):
    for e in n3_exps + n4_exps:
        assert is_trivial_density(e.h[0])


def test_h1_sum_trivial(n4_exps):
    total = sum((e.h[1] for e in n4_exps), Expr.const(0))
    assert is_trivial_density(total)


def test_quasi_degree_checked(n4_exps):
    forms = extract_forms(n4_exps, with_quartic=False)
    assert forms.Q is None
    for k, G in enumerate(forms.G):
        assert linalg.is_symmetric(G)
        assert is_trivial_density(forms.rebuild_h1(k) - n4_exps[k].h[1])


def test_xi_zero_rejected(n3_exps):
    forms = extract_forms(n3_exps)
    with pytest.raises(ValueError):
        reconstruct_leading_metric(forms, wdvv.flat_metric(3), (0, 0, 0))
    with pytest.raises(ValueError):
        reconstruct_leading_metric(forms, wdvv.flat_metric(3), (1, 1))


def test_branch_out_of_range():
    with pytest.raises(ValueError):
        expand_branch(4, 5, 1, use_cache=False)
    with pytest.raises(ValueError):
        expand_branch(4, 0, 1, use_cache=False)


def test_cache_round_trip(tmp_path, monkeypatch):
    monkeypatch.setenv("WDVVKIT_CACHE", str(tmp_path))
    e = expand_branch(3, 2, 1)
    files = list((tmp_path / "expansions").glob("*.json"))
    assert len(files) == 1
    again = expand_branch(3, 2, 1)
    assert again.h == e.h
    d = json.loads(files[0].read_text())
    assert BranchExpansion.from_dict(d).h == e.h


def test_budget_exceeded_raises():
    with pytest.raises(BudgetExceeded):
        expand_branch(4, 1, 3, budget=Budget(seconds=0.0), use_cache=False)


def test_n4_densities_conserved(n4_exps):
    dens = wdvv.hamiltonian_densities_flat(4)
    for label in ("y", "z"):
        vm = wdvv.viete_map(4)
        K = wdvv.flat_metric(4)
        comps = range(vm.source_first, vm.source_first + vm.n)
        grad = [variational_derivative(dens[label], "u", i) for i in comps]
        flow = {("u", i): total_derivative(f) for i, f in zip(comps, linalg.matvec(K, grad))}
        for e in n4_exps:
            for h in e.h:
                assert is_trivial_density(evolutionary_derivative(h, flow), ["u"])


def test_n3_densities_conserved(n3_exps):
    vm = wdvv.viete_map(3)
    Jinv = linalg.inverse(vm.jacobian())
    s = wdvv.build_systems(3)[0]
    ut = linalg.matvec(Jinv, [total_derivative(vm.pull_jet(v)) for v in s.fluxes])
    flow = {("u", j + 1): ut[j] for j in range(3)}
    for e in n3_exps:
        for h in e.h:
            assert is_trivial_density(evolutionary_derivative(h, flow), ["u"])


def test_n3_reconstruction_factor_and_recursion_constant(n3_exps):
    """Diagnostic for the failing N=3 reconstruction: the published pair
    satisfies the recursion with constant 1/2, which is exactly the gap."""
    forms = extract_forms(n3_exps)
    xi = (1, 0, -1)
    K = wdvv.flat_metric(3)
    vm = wdvv.viete_map(3)
    target = reconstruction_target(3)
    raw = pushforward_metric(reconstruct_leading_metric(forms, K, xi), vm).entries
    ratios = {raw[i][j] / target[i][j] for i in range(3) for j in range(3) if not target[i][j].is_zero()}
    assert ratios == {Expr.const(Fraction(1, 2))}
    fixed = pushforward_metric(reconstruct_leading_metric(forms, K, xi, Fraction(1, 2)), vm).entries
    assert linalg.mat_eq(fixed, target)

    ops = wdvv.n3_operators()
    A1 = ops["A1"].map_coefficients(vm.pull_jet, "u")
    A2 = ops["A2"].map_coefficients(vm.pull_jet, "u")
    JinvT = linalg.transpose(linalg.inverse(vm.jacobian()))

    def grad_a(h):
        return linalg.matvec(JinvT, [variational_derivative(h, "u", i) for i in (1, 2, 3)])

    for k, e in enumerate(n3_exps, 1):
        for lo, hi in ((jet("u", k), e.h[1]), (e.h[1], e.h[3])):
            lhs = apply(A1, grad_a(hi))
            rhs = apply(A2, grad_a(lo))
            assert all((x - y / 2).is_zero() for x, y in zip(lhs, rhs))
