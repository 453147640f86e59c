import pytest

from wdvvkit import linalg, wdvv
from wdvvkit.diffop import build_third_order_canonical
from wdvvkit.geometry import MetricCandidate
from wdvvkit.jet import Density, jet
from wdvvkit.reconstruct import (
    ConstraintError,
    ParallelSolution,
    ParallelSystemError,
    b_gradient,
    casimirs,
    compute_phi,
    constraint_suite,
    eta_matrices,
    hamiltonian_density,
    momentum,
    parallel_system_residuals,
    solve_parallel_system,
    verify_flow_b,
)


@pytest.fixture(scope="module")
def published():
    return ParallelSolution(wdvv.g6(), wdvv.psi6())


@pytest.fixture(scope="module")
def reduced(published):
    return published.factorized().reduced_operator()


def test_constant_metric():
    g = MetricCandidate([[0, 1], [1, 0]])
    sol = solve_parallel_system(g)
    assert all(e.is_constant() for row in sol.psi for e in row)
    assert linalg.mat_eq(sol.factorized().metric_entries(), g.entries)


def test_g6_solution_space():
    g = wdvv.g6()
    sol = solve_parallel_system(g)
    assert len(sol.psi) == 6
    assert sol.factorized().operator() == build_third_order_canonical(g)


def test_published_psi_columns_solve():
    g, P = wdvv.g6(), wdvv.psi6()
    for c in range(6):
        col = [P[i][c] for i in range(6)]
        assert all(r.is_zero() for r in parallel_system_residuals(g, col))


def test_compute_phi():
    assert linalg.mat_eq(compute_phi(wdvv.g6(), wdvv.psi6()), wdvv.phi6())


def test_compute_phi_rejects_wrong_psi():
    with pytest.raises(ParallelSystemError):
        compute_phi(wdvv.g6(), linalg.identity(6))


def test_det_identity():
    # det g = det(psi)^2 det(phi)
    g = wdvv.g6()
    lhs = linalg.det(g.entries)
    rhs = linalg.det(wdvv.psi6()) ** 2 * linalg.det(wdvv.phi6())
    assert lhs == rhs


def test_n3_solution():
    g3 = wdvv.n3_monge_metric()
    sol = solve_parallel_system(g3)
    assert sol.factorized().operator() == wdvv.n3_operators()["A2"]


def test_casimirs_are_published_up_to_signed_relabelling(published, reduced):
    dens = wdvv.n4_b_densities()
    ours = [b_gradient(s, 6) for s in casimirs(published)]
    theirs = [b_gradient(dens[f"s{k}"], 6) for k in range(1, 7)]
    perm = [1, 4, 6, 3, 2, 5]
    sign = [1, 1, 1, -1, -1, -1]
    for k in range(6):
        got = theirs[k]
        want = ours[perm[k] - 1]
        assert all((x - sign[k] * y).is_zero() for x, y in zip(got, want))
    zero = [0] * 6
    for s in casimirs(published):
        assert verify_flow_b(reduced, s, zero)
    for k in range(1, 7):
        assert verify_flow_b(reduced, dens[f"s{k}"], zero)


def test_momentum(published, reduced):
    P = momentum(published)
    assert Density(P, "b", 6).equivalent(wdvv.n4_b_densities()["P"])
    assert verify_flow_b(reduced, P, [jet("b", i, 1) for i in range(1, 7)])


def test_eta_matrices(published):
    y, z = wdvv.build_systems(4)
    e1 = eta_matrices(published, y.fluxes)
    e2 = eta_matrices(published, z.fluxes)
    assert e1 == [[x.constant_value() for x in r] for r in wdvv.eta1()]
    assert e2 == [[x.constant_value() for x in r] for r in wdvv.eta2()]
    assert e1[4][2] == -2


@pytest.mark.parametrize("mode", ["standard", "compact"])
def test_hamiltonian_densities(published, reduced, mode):
    dens = wdvv.n4_b_densities()
    for sys, key in zip(wdvv.build_systems(4), ("h1", "h2")):
        eta = eta_matrices(published, sys.fluxes)
        h = hamiltonian_density(published, eta, mode)
        assert Density(h, "b", 6).equivalent(dens[key])
        assert verify_flow_b(reduced, h, sys.in_potentials())


def test_bad_eta_rejected(published):
    eta = [[0] * 6 for _ in range(6)]
    eta[0][0] = 1
    with pytest.raises(ConstraintError):
        hamiltonian_density(published, eta)


def test_constraints_hold(published):
    res = constraint_suite(published, [wdvv.eta1(), wdvv.eta2()])
    assert res and all(res.values())


def test_n3_pipeline():
    sol = solve_parallel_system(wdvv.n3_monge_metric())
    op = sol.factorized().reduced_operator()
    (s3,) = wdvv.build_systems(3)
    assert verify_flow_b(op, wdvv.n3_hamiltonian_b(), s3.in_potentials())
    for s in casimirs(sol):
        assert verify_flow_b(op, s, [0] * 3)
    assert verify_flow_b(op, momentum(sol), [jet("b", i, 1) for i in (1, 2, 3)])
    h = hamiltonian_density(sol, eta_matrices(sol, s3.fluxes))
    assert verify_flow_b(op, h, s3.in_potentials())
