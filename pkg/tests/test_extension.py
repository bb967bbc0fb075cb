import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from midscale.extension import ExtendedPotentials
from midscale.measures import CostSpec, GeneratorSpec, SingularGradientError, generate
from midscale.sinkhorn import solve


def solved(X, Y, eps=0.1, family="sqeuclidean", tol=1e-11):
    cost = CostSpec(family).freeze(X, Y)
    a = np.full(len(X), 1 / len(X))
    b = np.full(len(Y), 1 / len(Y))
    sol = solve(a, b, cost(X, Y), eps, tol=tol)
    return ExtendedPotentials(sol, X, Y, cost)


@pytest.fixture(scope="module")
def ball_circle():
    sx, sy = GeneratorSpec("uniform-ball", 3), GeneratorSpec("circle", 3)
    X, Y = generate(sx, 80, 0), generate(sy, 70, 1)
    cost = CostSpec.for_supports("sqeuclidean", sx, sy)
    sol = solve(np.full(80, 1 / 80), np.full(70, 1 / 70), cost(X, Y), 0.1, tol=1e-11)
    return ExtendedPotentials(sol, X, Y, cost), sx, sy


def test_extensions_reproduce_sample_values(ball_circle):
    pot, _, _ = ball_circle
    np.testing.assert_allclose(pot.extend_f(pot.X), pot.solution.f, atol=1e-9)
    np.testing.assert_allclose(pot.extend_g(pot.Y), pot.solution.g, atol=1e-9)
    assert pot.extend_f(pot.X[3]) == pytest.approx(pot.solution.f[3], abs=1e-9)


def test_single_target_atom():
    X = np.array([[0.0, 0.1], [0.3, -0.2]])
    y0 = np.array([[0.2, 0.2]])
    pot = solved(X, y0)
    assert pot.solution.g[0] == pytest.approx(0.0, abs=1e-15)
    xs = np.array([[0.5, 0.5], [-0.1, 0.0]])
    np.testing.assert_allclose(pot.extend_f(xs), pot.cost(xs, y0).ravel(), atol=1e-14)
    np.testing.assert_allclose(pot.entropic_map(xs), np.repeat(y0, 2, axis=0))


def test_single_source_atom():
    x0 = np.array([[0.1, -0.3]])
    Y = np.array([[0.0, 0.1], [0.3, -0.2], [0.4, 0.4]])
    pot = solved(x0, Y)
    ys = np.array([[0.5, 0.5], [-0.1, 0.0]])
    np.testing.assert_allclose(pot.extend_g(ys), pot.cost(x0, ys).ravel() - pot.solution.f[0], atol=1e-14)
    # squared Euclidean, rescaled by r: grad g(y) = 2 r (y - x0)
    r = pot.cost.scale
    np.testing.assert_allclose(pot.map_gradient_g(ys), 2 * r * (ys - x0), atol=1e-14)


def test_zero_cost_density_and_map():
    X = np.zeros((3, 2))
    Y = np.array([[0.0, 0.0], [0.0, 0.0]])
    cost = CostSpec("custom", lipschitz=1.0, scale=1.0, func=lambda A, B: np.zeros((len(A), len(B))),
                    grad_y=lambda A, y: np.zeros_like(A))
    sol = solve(np.full(3, 1 / 3), [0.25, 0.75], np.zeros((3, 2)), 0.5)
    pot = ExtendedPotentials(sol, X, Y + np.array([[1.0, 0.0], [0.0, 2.0]]), cost)
    pts = np.random.default_rng(0).standard_normal((5, 2))
    np.testing.assert_allclose(pot.density(pts, pts), 1.0, atol=1e-14)
    np.testing.assert_allclose(pot.entropic_map(pts), np.tile([0.25, 1.5], (5, 1)), atol=1e-14)
    np.testing.assert_array_equal(pot.map_gradient_g(pts), 0.0)


def test_symmetric_two_point_map():
    X = Y = np.array([[0.0], [1.0]])
    pot = solved(X, Y, eps=1.0, tol=1e-13)
    np.testing.assert_allclose(pot.solution.C, [[0, 1], [1, 0]])
    expected = math.exp(-1) / (1 + math.exp(-1))
    assert pot.entropic_map(np.array([0.0]))[0] == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(0.268941, abs=1e-6)


def test_on_sample_row_sums(ball_circle):
    pot, _, _ = ball_circle
    P = pot.density(pot.X, pot.Y)
    np.testing.assert_allclose(P.mean(axis=1), 1.0, atol=10 * pot.solution.tol)
    np.testing.assert_allclose(P.mean(axis=0), 1.0, atol=10 * pot.solution.tol)


def test_batched_and_single_inputs_agree(ball_circle):
    pot, _, _ = ball_circle
    pts = pot.X[:4]
    assert np.allclose([pot.extend_f(p) for p in pts], pot.extend_f(pts))
    assert np.allclose([pot.extend_g(p) for p in pts], pot.extend_g(pts))
    assert np.allclose(np.array([pot.entropic_map(p) for p in pts]), pot.entropic_map(pts))
    D = pot.density(pts, pot.Y[:3])
    assert D.shape == (4, 3)
    assert pot.density(pts[0], pot.Y[1]) == pytest.approx(D[0, 1])


def test_wrong_dimension_is_rejected(ball_circle):
    pot, _, _ = ball_circle
    with pytest.raises(ValueError):
        pot.extend_f(np.zeros(5))


def test_unfrozen_cost_is_rejected():
    X = np.zeros((1, 1))
    sol = solve([1.0], [1.0], [[0.0]], 1.0)
    with pytest.raises(ValueError):
        ExtendedPotentials(sol, X, X, CostSpec())


def test_map_gradient_matches_finite_differences(ball_circle):
    pot, _, _ = ball_circle
    rng = np.random.default_rng(3)
    h = 1e-5
    for y in rng.uniform(-1, 1, (100, 3)):
        grad = pot.map_gradient_g(y)
        fd = (pot.extend_g(y + h * np.eye(3)) - pot.extend_g(y - h * np.eye(3))) / (2 * h)
        assert np.linalg.norm(fd - grad) <= 1e-5 * np.linalg.norm(grad)


def test_euclidean_map_gradient_singular_at_sample():
    X = np.array([[0.0, 0.0], [0.5, 0.0]])
    pot = solved(X, X, family="euclidean")
    with pytest.raises(SingularGradientError):
        pot.map_gradient_g(X[0])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), step=st.floats(1e-4, 0.5))
def test_lipschitz_certificates(ball_circle, seed, step):
    pot, sx, sy = ball_circle
    L, eps = pot.cost.effective_lipschitz, pot.eps
    rng = np.random.default_rng(seed)
    x0 = generate(sx, 50, rng)
    x1 = x0 + step * rng.standard_normal(x0.shape)
    x1 /= np.maximum(np.linalg.norm(x1, axis=1, keepdims=True), 1.0)
    dx = np.linalg.norm(x0 - x1, axis=1)
    assert np.all(np.abs(pot.extend_f(x0) - pot.extend_f(x1)) <= L * dx * (1 + 1e-8))
    y0, y1 = generate(sy, 50, rng), generate(sy, 50, rng)
    dy = np.linalg.norm(y0 - y1, axis=1)
    assert np.all(np.abs(pot.extend_g(y0) - pot.extend_g(y1)) <= L * dy * (1 + 1e-8))
    lp0 = np.log(np.diag(pot.density(x0, y0)))
    lp1 = np.log(np.diag(pot.density(x0, y1)))
    assert np.all(np.abs(lp0 - lp1) <= 2 * L / eps * dy * (1 + 1e-8))
