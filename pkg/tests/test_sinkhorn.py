import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from midscale.sinkhorn import (
    ConvergenceError,
    DualSolution,
    dual_gradient,
    dual_objective,
    entropic_value,
    marginal_residual,
    round_f,
    round_g,
    semi_rounded_objective,
    solve,
)

PHI = math.log(2) - math.log(1 + math.exp(-1))  # symmetric two-point potential, eps = 1
SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])
HALF = np.array([0.5, 0.5])


def scaling_oracle(a, b, C, eps, iters=20_000):
    """Plain exp-domain matrix scaling; returns potentials normalized so b.g = 0."""
    K = np.exp(-C / eps)
    v = np.ones(b.size)
    for _ in range(iters):
        u = 1.0 / (K @ (b * v))
        v = 1.0 / (K.T @ (a * u))
    f, g = eps * np.log(u), eps * np.log(v)
    shift = b @ g
    return f + shift, g - shift


def random_problem(rng, n=None, m=None):
    n = n or int(rng.integers(2, 9))
    m = m or int(rng.integers(2, 9))
    return rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(m)), rng.random((n, m))


# -- solve -------------------------------------------------------------------


@pytest.mark.parametrize("eps", [0.01, 1.0, 7.0])
def test_one_atom_system(eps):
    sol = solve([1.0], [1.0], [[0.37]], eps)
    np.testing.assert_allclose(sol.g, [0.0])
    np.testing.assert_allclose(sol.f, [0.37])
    assert sol.residual <= 1e-15
    assert entropic_value(sol) == pytest.approx(0.37)


def test_zero_cost_gives_zero_potentials():
    a = np.full(4, 0.25)
    b = np.array([0.2, 0.3, 0.5])
    sol = solve(a, b, np.zeros((4, 3)), 0.3)
    np.testing.assert_allclose(sol.f, 0, atol=1e-15)
    np.testing.assert_allclose(sol.g, 0, atol=1e-15)
    assert entropic_value(sol) == pytest.approx(0.0, abs=1e-15)


def test_symmetric_two_point_closed_form():
    sol = solve(HALF, HALF, SWAP, 1.0, tol=1e-13)
    np.testing.assert_allclose(sol.g, 0, atol=1e-13)
    np.testing.assert_allclose(sol.f, PHI, atol=1e-12)
    assert PHI == pytest.approx(0.379885, abs=1e-6)
    assert entropic_value(sol) == pytest.approx(PHI, abs=1e-12)


def test_matches_independent_scaling_iteration():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a, b, C = random_problem(rng)
        eps = float(rng.uniform(0.1, 2.0))
        sol = solve(a, b, C, eps, tol=1e-13)
        f, g = scaling_oracle(a, b, C, eps)
        np.testing.assert_allclose(sol.f, f, atol=1e-10)
        np.testing.assert_allclose(sol.g, g, atol=1e-10)


@pytest.mark.parametrize("eps", [0.05, 0.1, 0.5])
def test_residual_meets_tolerance_and_normalization(eps):
    rng = np.random.default_rng(1)
    X, Y = rng.uniform(-0.5, 0.5, (60, 3)), rng.uniform(-0.5, 0.5, (50, 3))
    C = ((X[:, None] - Y[None]) ** 2).sum(-1) / 3
    a, b = np.full(60, 1 / 60), np.full(50, 1 / 50)
    sol = solve(a, b, C, eps, tol=1e-10)
    assert sol.residual <= 1e-10
    assert marginal_residual(sol.f, sol.g, a, b, C, eps) <= 1e-10
    assert abs(b @ sol.g) <= 1e-14
    assert abs(entropic_value(sol) - dual_objective(sol.f, sol.g, a, b, C, eps)) <= 1e-9
    P = sol.density() * a[:, None] * b[None, :]
    np.testing.assert_allclose(P.sum(axis=1), a, atol=1e-10)
    np.testing.assert_allclose(P.sum(axis=0), b, atol=1e-10)


def test_warm_start_reaches_same_solution():
    rng = np.random.default_rng(2)
    a, b, C = random_problem(rng, 30, 25)
    cold = solve(a, b, C, 0.05, tol=1e-12)
    warm = solve(a, b, C, 0.05, tol=1e-12, g0=solve(a, b, C, 0.1).g)
    np.testing.assert_allclose(warm.f, cold.f, atol=1e-10)
    assert warm.iterations < cold.iterations


def test_nonconvergence_raises_with_partial_solution():
    rng = np.random.default_rng(3)
    a, b, C = random_problem(rng, 30, 30)
    with pytest.raises(ConvergenceError) as info:
        solve(a, b, C, 1e-3, tol=1e-14, max_iter=5)
    assert info.value.iterations == 5
    assert info.value.residual > 1e-14
    assert info.value.solution is not None


@pytest.mark.parametrize(
    "args",
    [
        ([0.5, 0.5], [1.0], [[0.0], [1.0]], -1.0),
        ([0.5, 0.6], [1.0], [[0.0], [1.0]], 1.0),
        ([0.5, 0.5], [1.0], [[0.0, 1.0]], 1.0),
        ([1.0], [1.0], [[np.nan]], 1.0),
    ],
)
def test_invalid_problems_raise(args):
    with pytest.raises(ValueError):
        solve(*args)


def test_json_round_trip():
    sol = solve(HALF, HALF, SWAP, 1.0)
    back = DualSolution.from_json(sol.to_json(), C=SWAP, a=HALF, b=HALF)
    np.testing.assert_array_equal(back.f, sol.f)
    np.testing.assert_array_equal(back.g, sol.g)
    assert back.eps == sol.eps and back.iterations == sol.iterations


# -- objective, gradient, rounding -------------------------------------------


def test_dual_objective_zero_cost():
    assert dual_objective(np.zeros(2), np.zeros(3), HALF, np.full(3, 1 / 3), np.zeros((2, 3)), 1.0) == 0.0


def test_dual_objective_four_term_sum():
    val = dual_objective(np.zeros(2), np.zeros(2), HALF, HALF, SWAP, 1.0)
    assert val == pytest.approx(-(math.exp(-1) - 1) / 2, abs=1e-15)
    assert val == pytest.approx(0.316060, abs=1e-6)


def test_gradient_vanishes_at_solution_and_at_zero_cost():
    sol = solve(HALF, HALF, SWAP, 1.0, tol=1e-12)
    gf, gg = dual_gradient(sol.f, sol.g, HALF, HALF, SWAP, 1.0)
    assert max(np.abs(gf).max(), np.abs(gg).max()) <= 1e-12
    gf, gg = dual_gradient(np.zeros(2), np.zeros(3), HALF, np.full(3, 1 / 3), np.zeros((2, 3)), 0.4)
    assert np.all(gf == 0) and np.all(gg == 0)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(4)
    h = 1e-5
    for _ in range(100):
        a, b, C = random_problem(rng)
        eps = float(rng.uniform(0.1, 1.0))
        f, g = 0.3 * rng.standard_normal(a.size), 0.3 * rng.standard_normal(b.size)
        gf, gg = dual_gradient(f, g, a, b, C, eps)
        analytic = np.concatenate([a * gf, b * gg])
        x0 = np.concatenate([f, g])

        def phi(x):
            return dual_objective(x[: a.size], x[a.size :], a, b, C, eps)

        fd = np.array([(phi(x0 + h * e) - phi(x0 - h * e)) / (2 * h) for e in np.eye(x0.size)])
        assert np.linalg.norm(fd - analytic) <= 1e-5 * np.linalg.norm(analytic)


def test_rounding_is_idempotent_at_fixed_point():
    rng = np.random.default_rng(5)
    a, b, C = random_problem(rng, 20, 15)
    sol = solve(a, b, C, 0.2, tol=1e-12)
    np.testing.assert_allclose(round_f(sol.g, C, b, 0.2), sol.f, atol=1e-9)
    np.testing.assert_allclose(round_g(sol.f, C, a, 0.2), sol.g, atol=1e-9)


def test_rounding_with_zero_cost_is_constant():
    g = np.array([0.3, -1.0, 2.0])
    b = np.array([0.2, 0.5, 0.3])
    eps = 0.7
    expected = -eps * math.log(np.sum(b * np.exp(g / eps)))
    np.testing.assert_allclose(round_f(g, np.zeros((4, 3)), b, eps), expected, rtol=1e-14)


def test_rounding_improves_the_dual():
    rng = np.random.default_rng(6)
    for _ in range(100):
        a, b, C = random_problem(rng)
        eps = float(rng.uniform(0.05, 1.0))
        g = rng.standard_normal(b.size)
        gain = dual_objective(round_f(g, C, b, eps), g, a, b, C, eps) - dual_objective(
            np.zeros(a.size), g, a, b, C, eps
        )
        assert gain >= -1e-12


def test_semi_rounded_objective_is_maximized_at_solution():
    rng = np.random.default_rng(7)
    a, b, C = random_problem(rng, 12, 10)
    eps = 0.2
    sol = solve(a, b, C, eps, tol=1e-12)
    top = semi_rounded_objective(sol.g, a, b, C, eps)
    assert abs(top - entropic_value(sol)) <= 1e-11
    for _ in range(100):
        g = rng.standard_normal(b.size)
        g -= b @ g
        assert top - semi_rounded_objective(g, a, b, C, eps) >= -1e-10


def test_semi_rounded_objective_zero_cost_jensen():
    b = np.array([0.25, 0.25, 0.5])
    C = np.zeros((2, 3))
    assert semi_rounded_objective(np.full(3, 0.4), HALF, b, C, 0.3) == pytest.approx(0.0, abs=1e-15)
    assert semi_rounded_objective(np.array([1.0, -1.0, 0.0]), HALF, b, C, 0.3) < 0


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), eps=st.floats(0.02, 3.0))
def test_solution_properties(seed, eps):
    rng = np.random.default_rng(seed)
    a, b, C = random_problem(rng)
    sol = solve(a, b, C, eps, tol=1e-10)
    # pointwise control for costs in [0, 1]
    assert np.abs(sol.f).max() <= 2 + 1e-6 and np.abs(sol.g).max() <= 2 + 1e-6
    # value sits between the independent-coupling bound and min cost
    assert sol.value <= a @ C @ b + 1e-9
    assert sol.value >= C.min() - 1e-9
    # shifting (f + k, g - k) leaves the dual objective unchanged
    k = float(rng.standard_normal())
    assert dual_objective(sol.f + k, sol.g - k, a, b, C, eps) == pytest.approx(
        dual_objective(sol.f, sol.g, a, b, C, eps), abs=1e-12
    )


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_concavity_first_order_bounds(seed):
    rng = np.random.default_rng(seed)
    a, b, C = random_problem(rng)
    eps = float(rng.uniform(0.1, 1.0))
    f0, g0, f1, g1 = (0.5 * rng.standard_normal(s) for s in (a.size, b.size, a.size, b.size))
    p0 = dual_objective(f0, g0, a, b, C, eps)
    p1 = dual_objective(f1, g1, a, b, C, eps)
    gf1, gg1 = dual_gradient(f1, g1, a, b, C, eps)
    gf0, gg0 = dual_gradient(f0, g0, a, b, C, eps)
    d = a @ (gf1 * (f0 - f1)) + b @ (gg1 * (g0 - g1))
    d0 = a @ (gf0 * (f0 - f1)) + b @ (gg0 * (g0 - g1))
    assert p0 - p1 <= d + 1e-10
    assert p0 - p1 >= d0 - 1e-10
