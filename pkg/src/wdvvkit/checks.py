"""Named verification suites. Each returns a list of Verdicts; the CLI turns
them into manifests and the acceptance tests assert on them."""

from __future__ import annotations

import itertools
import multiprocessing as mp
import random
from fractions import Fraction
from typing import Callable

from . import lax, linalg, poisson, reconstruct, wdvv
from .algebra import Expr, Var
from .diffop import Dx, adjoint, build_third_order_canonical, compose, mult
from .geometry import CoordinateMap, MetricCandidate, curvature, pushforward_metric
from .jet import is_trivial_density, jet, total_derivative
from .poisson import Verdict, run_check

# acceptance criterion -> the aggregate check id that decides it
CRITERIA = {
    1: "n3.suite",
    2: "n4.operators",
    3: "n4.flows",
    4: "n4.compatibility",
    5: "n4.lax",
    6: "n3.reconstruct",
    7: "n4.reconstruct",
    8: "properties",
}


def aggregate(check: str, subject: str, parts: list[Verdict]) -> Verdict:
    v = Verdict(
        check,
        subject,
        all(v.result for v in parts),
        round(sum(v.elapsed for v in parts), 3),
        max((v.peak_terms for v in parts), default=0),
        ", ".join(v.check for v in parts if not v.result),
    )
    v.budget_exceeded = any(p.budget_exceeded for p in parts)
    return v


def _matrix_terms(m) -> int:
    return max((e.n_terms() for row in m for e in row), default=0)


# -- three components -----------------------------------------------------------


def suite_n3() -> list[Verdict]:
    ops = wdvv.n3_operators()
    A1, A2 = ops["A1"], ops["A2"]
    g = wdvv.n3_monge_metric()
    out = [
        run_check("n3.A1.skew", "three-component first-order operator", lambda: poisson.is_skew_adjoint(A1)),
        run_check("n3.A2.skew", "three-component third-order operator", lambda: poisson.is_skew_adjoint(A2)),
    ]
    for name, (x, y) in (("A1A1", (A1, A1)), ("A2A2", (A2, A2)), ("A1A2", (A1, A2))):
        out.append(
            run_check(f"n3.bracket.{name}", "Schouten bracket, three components", lambda x=x, y=y: poisson.schouten_bracket_vanishes(x, y))
        )
    out += [
        run_check("n3.g.monge", "three-component Monge metric", lambda: poisson.check_monge(g)),
        run_check("n3.g.potemin", "three-component Monge metric", lambda: poisson.check_potemin(g)),
        run_check(
            "n3.g.inverse-leading",
            "inverse metric is the leading coefficient",
            lambda: linalg.mat_eq(linalg.inverse(g.entries), A2.coefficient(3)),
        ),
        run_check("n3.g.flat", "three-component metric is flat", lambda: curvature(g).riemann_is_zero()),
        run_check("n3.A2.canonical", "canonical operator from the metric", lambda: build_third_order_canonical(g) == A2),
    ]
    return out + [aggregate(CRITERIA[1], "three-component suite", out)]


# -- four components: operators --------------------------------------------------


def _n4_curvature():
    rep = curvature(wdvv.g6())
    ok = (not rep.riemann_is_zero()) and rep.scalar.is_zero() and (not rep.weyl_is_zero())
    return ok, 0, f"riemann_zero={rep.riemann_is_zero()} scalar={rep.scalar.to_text()} weyl_zero={rep.weyl_is_zero()}"


def suite_n4_operators() -> list[Verdict]:
    from .diffop import first_order_dn_from_operator

    g = wdvv.g6()
    a1 = jet("a", 1)
    out = [
        run_check("n4.A1.dn", "first-order operator in Casimir coordinates", lambda: poisson.check_first_order_dn(first_order_dn_from_operator(wdvv.n4_A1()))),
        run_check("n4.g.monge", "six-component Monge metric", lambda: poisson.check_monge(g)),
        run_check("n4.g.potemin", "six-component Monge metric", lambda: poisson.check_potemin(g)),
        run_check("n4.det.g", "det g = (a1)^4", lambda: linalg.det(g.entries) == a1**4),
        run_check("n4.det.psi", "det psi = -(a1)^2", lambda: linalg.det(wdvv.psi6()) == -(a1**2)),
        run_check("n4.det.phi", "det phi = 1", lambda: linalg.det(wdvv.phi6()) == Expr.const(1)),
        run_check(
            "n4.factorized",
            "factorized form equals canonical form",
            lambda: (wdvv.n4_factorized().operator() == build_third_order_canonical(g), wdvv.n4_factorized().operator().max_terms(), ""),
        ),
        run_check("n4.curvature", "Riemann and Weyl nonzero, scalar zero", _n4_curvature),
    ]
    return out + [aggregate(CRITERIA[2], "six-component operator suite", out)]


# -- four components: flows ----------------------------------------------------


def suite_n4_flows() -> list[Verdict]:
    ps = reconstruct.ParallelSolution(wdvv.g6(), wdvv.psi6())
    op = ps.factorized().reduced_operator()
    dens = wdvv.n4_b_densities()
    sy, sz = wdvv.build_systems(4)
    out = [run_check("n4.flows.K", "K D_x with h7 and h8 generates both flows", lambda: all(wdvv.verify_flow(4).values()))]
    for key, s in (("h1", sy), ("h2", sz)):
        out.append(
            run_check(
                f"n4.flows.b.{key}",
                "reduced third-order operator in potentials",
                lambda key=key, s=s: reconstruct.verify_flow_b(op, dens[key], s.in_potentials()),
            )
        )
    zero = [Expr.const(0)] * 6
    out.append(
        run_check(
            "n4.casimirs",
            "six nonlocal Casimirs give zero flows",
            lambda: all(reconstruct.verify_flow_b(op, dens[f"s{i}"], zero) for i in range(1, 7)),
        )
    )
    out.append(
        run_check(
            "n4.momentum",
            "momentum generates x-translations",
            lambda: reconstruct.verify_flow_b(op, dens["P"], [jet("b", i, 1) for i in range(1, 7)]),
        )
    )

    def constraints():
        res = reconstruct.constraint_suite(ps, [wdvv.eta1(), wdvv.eta2()])
        return all(res.values()), 0, " ".join(f"{k}={v}" for k, v in sorted(res.items()))

    out.append(run_check("n4.constraints", "algebraic constraints on psi, phi, eta", constraints))
    return out + [aggregate(CRITERIA[3], "six-component bi-Hamiltonian flows", out)]


# -- compatibility ----------------------------------------------------------------


def _bracket_job(q):
    ops = wdvv.published_operators(4)
    q.put(poisson.schouten_bracket_vanishes(ops["A1"], ops["A2"].operator()))


def _split_check() -> tuple[bool, str]:
    """The fallback when the full mixed bracket does not fit the budget."""
    potemin = poisson.check_potemin(wdvv.g6())
    ops = wdvv.n3_operators()
    n3 = poisson.schouten_bracket_vanishes(ops["A1"], ops["A2"], full=True)
    # partial reduction: the p-components of the trivector of A2 alone
    A2 = wdvv.published_operators(4)["A2"].operator()
    part = all(e.is_zero() for e in poisson.trivector_residual(A2, A2, full=False)[:2])
    return potemin and n3 and part, f"split check: potemin={potemin} n3_bracket={n3} partial_A2A2={part}"


def suite_compatibility(seconds: float | None = 7200) -> list[Verdict]:
    def job():
        if not seconds:
            ops = wdvv.published_operators(4)
            return poisson.schouten_bracket_vanishes(ops["A1"], ops["A2"].operator())
        ctx = mp.get_context("fork")
        q = ctx.Queue()
        p = ctx.Process(target=_bracket_job, args=(q,))
        p.start()
        p.join(seconds)
        if p.is_alive():
            p.terminate()
            p.join()
            ok, detail = _split_check()
            return ok, 0, f"budget of {seconds}s exceeded for the full bracket; {detail}"
        try:
            return q.get(timeout=5)
        except Exception:
            return False, 0, f"bracket worker exited with code {p.exitcode}"

    out = [run_check("n4.bracket.A1A2", "mixed Schouten bracket, six components", job)]
    return out + [aggregate(CRITERIA[4], "compatibility of the six-component pair", out)]


# -- Lax expansion ----------------------------------------------------------------


def _rank_at_points(mats: list, points: int = 3, seed: int = 1) -> int:
    """Rank of the span of the given matrices of functions, sampled at points."""
    vs = sorted(set().union(*(e.variables() for m in mats for row in m for e in row)), key=Var.sort_key)
    rng = random.Random(seed)
    rows = [[] for _ in mats]
    for _ in range(points):
        pt = {v: Fraction(rng.randint(-50, 50), rng.randint(1, 7)) for v in vs}
        for r, m in zip(rows, mats):
            r.extend(e.evaluate(pt) for row in m for e in row)
    return linalg.rank(rows)


def suite_lax(N: int = 4, depth: int = 2, budget: lax.Budget | None = None) -> list[Verdict]:
    exps: list = []

    def expand():
        exps.extend(lax.expand_all(N, depth, budget))
        return True, max(h.n_terms() for e in exps for h in e.h), f"depth {depth}"

    out = [run_check(f"n{N}.lax.expand", "branch expansions in flat coordinates", expand)]
    if out[0].budget_exceeded:
        return out + [aggregate(CRITERIA[5] if N == 4 else f"n{N}.lax", "Lax expansion to degree two", out)]
    out.append(
        run_check(
            f"n{N}.lax.display",
            "eliminated scalar equation matches the displayed one",
            lambda: N != 4 or lax.scalar_lax_reduction(4) == lax.published_scalar_equation(),
        )
    )
    out.append(run_check(f"n{N}.lax.h0-trivial", "h_0k are total derivatives", lambda: all(is_trivial_density(e.h[0], ["u"]) for e in exps)))
    out.append(
        run_check(
            f"n{N}.lax.h1-sum",
            "sum of h_1k is trivial",
            lambda: is_trivial_density(sum((e.h[1] for e in exps), Expr.const(0)), ["u"]),
        )
    )
    forms: list = []

    def independent():
        forms.append(lax.extract_forms(exps, with_quartic=False))
        return _rank_at_points(forms[0].G[: N - 1]) == N - 1

    out.append(run_check(f"n{N}.lax.h1-independent", "h_11 .. h_1,N-1 linearly independent", independent))
    if N == 4:

        def nondegenerate():
            d = linalg.det(forms[0].combined(lax.DEFAULT_XI))
            return not d.is_zero(), d.n_terms(), ""

        out.append(run_check("n4.lax.xi-det", "det(G1 + G2/3 + G4/2) is nonzero", nondegenerate))
    return out + [aggregate(CRITERIA[5] if N == 4 else f"n{N}.lax", "Lax expansion to degree two", out)]


# -- reconstruction -----------------------------------------------------------------


def reconstruction_target(N: int) -> list:
    """Inverse of the known metric written in flat coordinates."""
    g = wdvv.n3_monge_metric() if N == 3 else wdvv.g6()
    vm = wdvv.viete_map(N)
    return [[vm.pull(e) for e in row] for row in linalg.inverse(g.entries)]


def suite_reconstruct(N: int, xi=None, budget: lax.Budget | None = None) -> list[Verdict]:
    exps: list = []

    def expand():
        exps.extend(lax.expand_all(N, 3, budget))
        return True, max(h.n_terms() for e in exps for h in e.h), ""

    out = [run_check(f"n{N}.reconstruct.expand", "expansions to degree four", expand)]
    cid = CRITERIA[6] if N == 3 else CRITERIA[7]
    if out[0].budget_exceeded:
        return out + [aggregate(cid, "end-to-end reconstruction of the leading metric", out)]

    def compare():
        forms = lax.extract_forms(exps)
        pref = xi if xi is not None else (lax.DEFAULT_XI if N == 4 else None)
        use = lax.choose_xi(forms, pref)
        g = lax.reconstruct_leading_metric(forms, wdvv.flat_metric(N), use)
        A = pushforward_metric(g, wdvv.viete_map(N)).entries
        target = reconstruction_target(N)
        ok = linalg.mat_eq(A, target)
        detail = "xi=" + ",".join(str(x) for x in use)
        if not ok:
            ratios = {(A[i][j] / target[i][j]).to_text() for i in range(N) for j in range(N) if not target[i][j].is_zero()}
            detail += f"; ratio to target: {sorted(ratios)}"
        return ok, _matrix_terms(A), detail

    out.append(run_check(f"n{N}.reconstruct.metric", "leading metric from the quadratic and quartic densities", compare))
    return out + [aggregate(cid, "end-to-end reconstruction of the leading metric", out)]


# -- properties ---------------------------------------------------------------------


def plucker_perturbations() -> dict[str, tuple[MetricCandidate, bool]]:
    """The N=3 Monge metric plus symmetric products of line-complex 1-forms,
    with whether the result satisfies the full integrability conditions."""
    g3 = wdvv.n3_monge_metric()
    a = [jet("a", i) for i in (1, 2, 3)]

    def d(k):
        return [Expr.const(int(i == k)) for i in range(3)]

    def pl(i, j):
        v = [Expr.const(0)] * 3
        v[j], v[i] = a[i], -a[j]
        return v

    cases = {
        "da1.da1": (d(0), d(0), True),
        "da1.p12": (d(0), pl(0, 1), True),
        "da2.da2": (d(1), d(1), True),
        "da2.p12": (d(1), pl(0, 1), False),
        "da2.da3": (d(1), d(2), False),
        "da3.da3": (d(2), d(2), False),
    }
    out = {}
    for name, (w1, w2, good) in cases.items():
        ent = [[g3.entries[i][j] + w1[i] * w2[j] + w1[j] * w2[i] for j in range(3)] for i in range(3)]
        out[name] = (MetricCandidate(ent, "a", 1, name=name), good)
    return out


def _random_poly(rng: random.Random, vs: list[Var], terms: int = 4) -> Expr:
    acc = Expr.const(rng.randint(-3, 3))
    for _ in range(terms):
        t = Expr.const(Fraction(rng.randint(-5, 5), rng.randint(1, 4)))
        for v in rng.sample(vs, rng.randint(1, 2)):
            t = t * Expr.var(v) ** rng.randint(1, 2)
        acc = acc + t
    return acc


def suite_properties(seed: int = 0, rounds: int = 5) -> list[Verdict]:
    rng = random.Random(seed)
    vs = [Var("u", i, k) for i in (1, 2) for k in (0, 1, 2)]
    base = [Var("u", i, 0) for i in (1, 2)]

    def ring():
        for _ in range(rounds):
            x, y, z = (_random_poly(rng, vs) for _ in range(3))
            w = _random_poly(rng, base) + 7
            if not ((x + y) * z == x * z + y * z and (x * y) * z == x * (y * z) and x - x == 0):
                return False
            if not ((x / w) * w == x):
                return False
        return True

    def euler_of_d():
        for _ in range(rounds):
            f = _random_poly(rng, vs) / (_random_poly(rng, base) + 5)
            if not is_trivial_density(total_derivative(f), ["u"]):
                return False
        return True

    def leibniz():
        for _ in range(rounds):
            f, g = _random_poly(rng, vs), _random_poly(rng, vs)
            if total_derivative(f * g) != total_derivative(f) * g + f * total_derivative(g):
                return False
        return True

    def adjoint_props():
        for _ in range(rounds):
            m1 = [[_random_poly(rng, base, 2) for _ in range(2)] for _ in range(2)]
            m2 = [[_random_poly(rng, base, 2) for _ in range(2)] for _ in range(2)]
            A = compose(mult(m1, "u", 1), Dx(2, rng.randint(1, 2), "u", 1))
            B = compose(Dx(2, 1, "u", 1), mult(m2, "u", 1))
            if adjoint(adjoint(A)) != A or adjoint(compose(A, B)) != compose(adjoint(B), adjoint(A)):
                return False
        return True

    def riemann_symmetries():
        rep = curvature(wdvv.g6())
        R = rep.riemann_lower
        n = rep.n
        for i, j, k, l in itertools.product(range(n), repeat=4):
            if not (R[i][j][k][l] + R[j][i][k][l]).is_zero():
                return False
            if not (R[i][j][k][l] - R[k][l][i][j]).is_zero():
                return False
            if not (R[i][j][k][l] + R[i][k][l][j] + R[i][l][j][k]).is_zero():
                return False
        return True

    def functoriality():
        u = [Expr.var(Var("u", i, 0)) for i in (1, 2, 3)]
        f = CoordinateMap("u", 1, "v", 1, (u[0], u[1] + u[0] ** 2, u[2] - u[0] * u[1]))
        v = [Expr.var(Var("v", i, 0)) for i in (1, 2, 3)]
        h = CoordinateMap("v", 1, "w", 1, (v[0] + v[2], v[1], v[2] + v[1] ** 2))
        g = MetricCandidate([[1, u[0], 0], [u[0], 2, u[1]], [0, u[1], 3]], "u", 1, contravariant=True)
        one = pushforward_metric(g, f.then(h))
        # two steps: push by f, rewrite in v through f's inverse, push by h, pull back to u
        finv = (v[0], v[1] - v[0] ** 2, v[2] + v[0] * (v[1] - v[0] ** 2))
        f2 = CoordinateMap("u", 1, "v", 1, f.forward, finv)
        two = pushforward_metric(pushforward_metric(g, f2), h)
        back = [[f.pull(e) for e in row] for row in two.entries]
        return linalg.mat_eq(one.entries, back)

    def potemin_vs_schouten():
        cases = {"n3": (wdvv.n3_monge_metric(), True), **plucker_perturbations()}
        for name, (g, expected) in cases.items():
            pot = poisson.check_potemin(g)
            sch = poisson.schouten_bracket_vanishes(*(2 * [build_third_order_canonical(g)]))
            if pot != sch or pot != expected:
                return False, 0, f"disagreement on {name}"
        return True, 0, f"{len(cases)} metrics"

    out = [
        run_check("prop.ring", "ring axioms and exact division", ring),
        run_check("prop.leibniz", "Leibniz rule for D_x", leibniz),
        run_check("prop.euler-d", "Euler operator kills total derivatives", euler_of_d),
        run_check("prop.adjoint", "adjoint involution and anti-homomorphism", adjoint_props),
        run_check("prop.riemann", "Riemann symmetries and first Bianchi identity", riemann_symmetries),
        run_check("prop.pushforward", "pushforward is functorial", functoriality),
        run_check("prop.potemin-schouten", "Potemin test agrees with the Schouten bracket", potemin_vs_schouten),
    ]
    return out + [aggregate(CRITERIA[8], "property suites", out)]


SUITES: dict[str, Callable[[], list[Verdict]]] = {
    "n3": suite_n3,
    "n4": lambda: suite_n4_operators() + suite_n4_flows() + suite_compatibility(),
    "props": suite_properties,
}
