import itertools
import time

import numpy as np
import pytest

from geatkey.quantum import choi_from_kraus, partial_trace
from geatkey.solvers import (AffineConstraint, FrankWolfeConfig, LmoResult, PsdBlock,
                             ScalarVar, SdpProblem, delta_com_greedy, frank_wolfe, solve_lp,
                             solve_sdp)

from conftest import random_hermitian, random_kraus


def vertex_enumeration_lp(c, a_ub, b_ub):
    """min c.x over {a_ub x <= b_ub} by checking every basic solution."""
    n = len(c)
    best = np.inf
    for rows in itertools.combinations(range(len(b_ub)), n):
        a = a_ub[list(rows)]
        if abs(np.linalg.det(a)) < 1e-12:
            continue
        x = np.linalg.solve(a, b_ub[list(rows)])
        if np.all(a_ub @ x <= b_ub + 1e-9):
            best = min(best, c @ x)
    return best


def tp_constraints(d_in, d_out):
    """Tr_B J = I written as d_in^2 real affine rows."""
    cons = []
    for i in range(d_in):
        for j in range(i, d_in):
            for part in ("re", "im") if i != j else ("re",):
                e = np.zeros((d_in, d_in), dtype=complex)
                if i == j:
                    e[i, i] = 1
                    rhs = 1.0
                elif part == "re":
                    e[i, j] = e[j, i] = 0.5
                    rhs = 0.0
                else:
                    e[i, j], e[j, i] = -0.5j, 0.5j
                    rhs = 0.0
                cons.append(AffineConstraint([np.kron(e, np.eye(d_out))], None, "=", rhs))
    return cons


def simplex_lmo(grad):
    k = int(np.argmin(grad))
    v = np.zeros_like(grad)
    v[k] = 1.0
    return LmoResult(v, float(grad[k]), float(grad[k]))


def test_lp_matches_vertex_enumeration(rng):
    for _ in range(20):
        n = 2
        a = rng.normal(size=(6, n))
        # box keeps it bounded
        a_ub = np.vstack([a, np.eye(n), -np.eye(n)])
        b_ub = np.concatenate([rng.uniform(0.5, 2, 6), np.full(2 * n, 3.0)])
        c = rng.normal(size=n)
        sol = solve_lp(c, ineq_constraints=(a_ub, b_ub), bounds=(None, None))
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(vertex_enumeration_lp(c, a_ub, b_ub), abs=1e-8)


def test_lp_duals_satisfy_stationarity(rng):
    a_eq = np.ones((1, 4))
    a_ub = rng.normal(size=(2, 4))
    c = rng.normal(size=4)
    sol = solve_lp(c, (a_eq, [1.0]), (a_ub, [0.5, 0.5]))
    y = sol.dual_vector
    assert np.all(y[1:] >= -1e-12)
    # reduced costs are nonnegative on x >= 0 and vanish on the support
    red = c + a_eq.T @ y[:1] + a_ub.T @ y[1:]
    assert np.all(red >= -1e-9)
    assert np.all(np.abs(red * sol.scalar_values) <= 1e-9)


def test_lp_maximize_infeasible_unbounded():
    sol = solve_lp([1.0, 2.0], eq_constraints=(np.ones((1, 2)), [1.0]), maximize=True)
    assert sol.objective == pytest.approx(2.0)
    assert solve_lp([1.0], eq_constraints=(np.ones((1, 1)), [-1.0])).status == "infeasible"
    assert solve_lp([-1.0]).status == "unbounded"


def test_sdp_minimum_eigenvalue(rng):
    for d in (2, 3, 5):
        c = random_hermitian(rng, d)
        p = SdpProblem([PsdBlock(d, c, trace=1.0)], [],
                       [AffineConstraint([np.eye(d)], None, "=", 1.0)])
        sol = solve_sdp(p)
        lam = np.linalg.eigvalsh(c)[0]
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(lam, abs=1e-7)
        assert sol.lower_bound <= lam + 1e-12
        assert sol.duality_gap <= 1e-8 * (1 + abs(sol.objective)) * max(1, np.abs(c).max())


def test_sdp_choi_product_objective(rng):
    # over channels, Tr[(I (x) B) J] = sum_i Tr[B E(|i><i|)] >= d_in lambda_min(B)
    b = random_hermitian(rng, 3)
    p = SdpProblem([PsdBlock(6, np.kron(np.eye(2), b), trace=2.0)], [], tp_constraints(2, 3))
    sol = solve_sdp(p)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(2 * np.linalg.eigvalsh(b)[0], abs=1e-7)
    assert np.allclose(partial_trace(sol.primal_blocks[0], (2, 3), 0), np.eye(2), atol=1e-7)


def test_sdp_diagonal_objective_is_classical(rng):
    # only the diagonal of J matters: a stochastic matrix, so min_j per row
    costs = rng.normal(size=(2, 3))
    p = SdpProblem([PsdBlock(6, np.diag(costs.ravel()).astype(complex), trace=2.0)], [],
                   tp_constraints(2, 3))
    sol = solve_sdp(p)
    assert sol.objective == pytest.approx(costs.min(axis=1).sum(), abs=1e-7)


def test_sdp_scalars_agree_with_lp(rng):
    for _ in range(5):
        n = 4
        c = rng.normal(size=n)
        a = rng.normal(size=(2, n))
        cons = [AffineConstraint([None], np.ones(n), "=", 1.0)]
        cons += [AffineConstraint([None], row, "<=", 0.3) for row in a]
        p = SdpProblem([PsdBlock(1, np.zeros((1, 1)), trace=None)],
                       [ScalarVar(ci, 0.0, 1.0) for ci in c], cons)
        sdp = solve_sdp(p)
        lp = solve_lp(c, (np.ones((1, n)), [1.0]), (a, [0.3, 0.3]), bounds=[(0, 1)] * n)
        assert lp.status == "optimal"
        assert sdp.objective == pytest.approx(lp.objective, abs=1e-7)
        assert sdp.lower_bound <= lp.objective + 1e-10


def test_sdp_weak_duality_on_random_feasible_points(rng):
    b = random_hermitian(rng, 6)
    g = random_hermitian(rng, 6)
    cons = tp_constraints(2, 3) + [AffineConstraint([g], None, "<=", 0.5)]
    sol = solve_sdp(SdpProblem([PsdBlock(6, b, trace=2.0)], [], cons))
    assert sol.lower_bound <= sol.objective + 1e-12
    for _ in range(50):
        j = choi_from_kraus(random_kraus(rng, 2, 3))
        if np.trace(g @ j).real <= 0.5:
            assert sol.lower_bound <= np.trace(b @ j).real + 1e-12


def test_sdp_infeasible():
    p = SdpProblem([PsdBlock(2, np.eye(2), trace=None)], [],
                   [AffineConstraint([np.eye(2)], None, "=", -1.0)])
    assert solve_sdp(p).status == "infeasible"


def test_sdp_dual_signs():
    # min x s.t. x >= 0.25, x <= 1: the >= row is active with a nonpositive dual
    p = SdpProblem([], [ScalarVar(1.0)],
                   [AffineConstraint([], [1.0], ">=", 0.25),
                    AffineConstraint([], [1.0], "<=", 1.0)])
    sol = solve_sdp(p)
    assert sol.objective == pytest.approx(0.25, abs=1e-8)
    assert sol.dual_vector[0] == pytest.approx(-1.0, abs=1e-6)
    assert sol.dual_vector[1] == pytest.approx(0.0, abs=1e-6)


def test_frank_wolfe_quadratic_on_simplex(rng):
    target = rng.dirichlet(np.ones(5))

    def fun(x):
        return float(np.sum((x - target) ** 2)), 2 * (x - target)

    res = frank_wolfe(fun, simplex_lmo, np.eye(5)[0], FrankWolfeConfig(gap_tol=1e-9,
                                                                      max_iter=2000))
    assert res.status == "converged"
    assert res.best_value <= 1e-9
    assert res.certified_lower_bound <= 1e-15
    assert np.allclose(res.best_iterate, target, atol=1e-4)


def test_frank_wolfe_linear_objective():
    c = np.array([0.3, -0.2, 0.5])
    res = frank_wolfe(lambda x: (float(c @ x), c), simplex_lmo, np.ones(3) / 3)
    assert res.best_value == pytest.approx(-0.2)
    assert res.certified_lower_bound == pytest.approx(-0.2)


def test_frank_wolfe_against_grid_oracle():
    # convex non-quadratic objective on the 2-simplex, minimized by brute force
    def val(x):
        return float(np.sum(x * np.log(x + 1e-300)) + 3 * (x[0] - 0.1) ** 2)

    def fun(x):
        return val(x), np.log(np.maximum(x, 1e-300)) + 1 + np.array([6 * (x[0] - 0.1), 0, 0])

    s = np.linspace(1e-9, 1, 801)
    grid = min(val(np.array([a, b, 1 - a - b])) for a in s for b in s if a + b <= 1)
    for variant in ("away", "pairwise", "vanilla"):
        res = frank_wolfe(fun, simplex_lmo, np.ones(3) / 3,
                          FrankWolfeConfig(gap_tol=1e-7, max_iter=5000, variant=variant))
        assert res.certified_lower_bound <= grid + 1e-12
        assert res.best_value == pytest.approx(grid, abs=1e-5)


def test_frank_wolfe_gap_history_monotone(rng):
    a = rng.normal(size=(4, 4))
    q = a @ a.T

    def fun(x):
        return float(x @ q @ x), 2 * q @ x

    res = frank_wolfe(fun, simplex_lmo, np.eye(4)[0], FrankWolfeConfig(max_iter=200))
    h = np.array(res.gap_history)
    assert np.all(np.diff(h) <= 1e-15)
    assert res.gap <= h[-1] + 1e-15


def test_frank_wolfe_reports_lmo_failure():
    def broken(grad):
        return LmoResult(None, np.nan, -np.inf, ok=False)

    res = frank_wolfe(lambda x: (0.0, np.zeros(2)), broken, np.array([1.0, 0.0]))
    assert res.status == "lmo-failure"
    assert res.lmo_failures == 1
    assert res.certified_lower_bound == -np.inf


def greedy_reference_lp(f, lo, hi):
    sol = solve_lp(f, (np.ones((1, f.size)), [0.0]), bounds=list(zip(-lo, hi)), maximize=True)
    return sol.objective


def test_delta_com_greedy_examples():
    assert delta_com_greedy([1.0, -1.0], [0.1, 0.1], [0.1, 0.1]) == pytest.approx(0.2)
    assert delta_com_greedy([1.0, 1.0], [0.1, 0.1], [0.1, 0.1]) == pytest.approx(0.0)
    assert delta_com_greedy([2.0, 0.0, -1.0], [0, 0, 0], [0, 0, 0]) == 0.0


def test_delta_com_greedy_matches_lp(rng):
    start = time.perf_counter()
    for _ in range(200):
        k = int(rng.integers(1, 13))
        f = rng.normal(size=k)
        lo, hi = rng.uniform(0, 0.1, k), rng.uniform(0, 0.1, k)
        assert delta_com_greedy(f, lo, hi) == pytest.approx(greedy_reference_lp(f, lo, hi),
                                                            abs=1e-9)
    assert time.perf_counter() - start < 5
