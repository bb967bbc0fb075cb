import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from midscale.measures import CostSpec, GeneratorSpec, generate
from midscale.rgg import (
    PAIR_FACTOR,
    RggGraph,
    build_rgg,
    dirichlet_form,
    lambda2,
    qg_diagnostic,
    uniform_variance,
)
from midscale.sinkhorn import solve


def edge_set(graph):
    coo = sp.triu(graph.adjacency).tocoo()
    return set(zip(coo.row.tolist(), coo.col.tolist()))


def test_collinear_threshold():
    g = build_rgg(np.array([[0.0], [0.4], [0.8]]), 0.5, d_nu=1)
    assert edge_set(g) == {(0, 1), (1, 2)}
    assert g.weight == pytest.approx(1 / (3 * 0.5**3))


def test_edges_are_strict():
    g = build_rgg(np.array([[0.0], [0.5]]), 0.5, d_nu=1)
    assert g.n_edges == 0


def test_complete_and_empty_graphs():
    X = np.random.default_rng(0).uniform(0, 1, (10, 2))
    assert build_rgg(X, 10.0, 2).n_edges == 45
    assert build_rgg(X, 1e-6, 2).n_edges == 0


def test_dirichlet_form_cases():
    g = build_rgg(np.array([[0.0], [0.5]]), 1.0, d_nu=1)
    assert g.weight == 0.5
    assert dirichlet_form(g, [1.0, -1.0]) == pytest.approx(2.0)
    assert dirichlet_form(g, [3.0, 3.0]) == 0.0
    empty = build_rgg(np.array([[0.0], [5.0]]), 1.0, d_nu=1)
    assert dirichlet_form(empty, [1.0, -1.0]) == 0.0


def test_dirichlet_form_matches_laplacian_quadratic_form():
    rng = np.random.default_rng(1)
    g = build_rgg(rng.uniform(0, 1, (40, 2)), 0.3, 2)
    L = g.laplacian().toarray()
    for _ in range(10):
        alpha = rng.standard_normal(40)
        assert dirichlet_form(g, alpha) == pytest.approx(PAIR_FACTOR / 40 * alpha @ L @ alpha, rel=1e-12)


def test_lambda2_complete_graph():
    g = build_rgg(np.array([[0.0], [0.1], [0.2]]), 1.0, d_nu=1)
    assert g.weight == pytest.approx(1 / 3)
    gap = lambda2(g)
    assert gap.lambda2 == pytest.approx(1.0, abs=1e-12) and gap.connected


def test_lambda2_disconnected_cases():
    X = np.array([[0.0], [0.1], [0.2], [5.0], [5.1]])
    gap = lambda2(build_rgg(X, 0.5, 1))
    assert gap.lambda2 == 0.0 and gap.n_components == 2 and not gap.connected
    empty = lambda2(build_rgg(X, 1e-3, 1))
    assert empty.lambda2 == 0.0 and empty.n_components == 5


def test_sparse_and_dense_eigensolvers_agree(monkeypatch):
    import midscale.rgg as rgg

    Y = generate(GeneratorSpec("circle", 2), 300, 4)
    g = build_rgg(Y, 0.3, 1)
    dense = lambda2(g).lambda2
    monkeypatch.setattr(rgg, "DENSE_EIG_LIMIT", 10)
    assert lambda2(g).lambda2 == pytest.approx(dense, rel=1e-8)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(5, 60), delta=st.floats(0.2, 1.0))
def test_variational_inequality(seed, n, delta):
    rng = np.random.default_rng(seed)
    g = build_rgg(rng.uniform(0, 1, (n, 2)), delta, 2)
    gap = lambda2(g)
    for _ in range(5):
        alpha = rng.standard_normal(n)
        lhs = dirichlet_form(g, alpha)
        assert lhs >= PAIR_FACTOR * gap.lambda2 * uniform_variance(alpha) * (1 - 1e-10) - 1e-12


# -- quadratic growth --------------------------------------------------------


@pytest.fixture(scope="module")
def solved_instance():
    spec = GeneratorSpec("uniform-ball", 3)
    X, Y = generate(spec, 100, 0), generate(spec, 100, 1)
    cost = CostSpec.for_supports("sqeuclidean", spec, spec)
    w = np.full(100, 0.01)
    return solve(w, w, cost(X, Y), 0.1, tol=1e-12)


def test_qg_zero_step_and_zero_direction(solved_instance):
    res = qg_diagnostic(solved_instance, np.zeros((1, 100)), t_grid=(0.0, 1e-3))
    assert np.all(res.deficits == 0.0)
    res = qg_diagnostic(solved_instance, 3, t_grid=(0.0, 1e-3, 2e-3))
    assert np.all(res.deficits[:, 0] == 0.0)


def test_qg_uncentered_direction_rejected(solved_instance):
    with pytest.raises(ValueError):
        qg_diagnostic(solved_instance, np.ones((1, 100)))


def test_qg_quadratic_behavior(solved_instance):
    res = qg_diagnostic(solved_instance, 10, seed=3)
    assert np.all(res.deficits >= -1e-10)
    assert np.all(res.coefficients > 0)
    assert np.all(res.ratio_spread() < 0.1)


def test_rgg_graph_is_plain_data():
    A = sp.csr_matrix(np.array([[0, 1], [1, 0]], dtype=bool))
    g = RggGraph(A, 2.0, 1.0, 1)
    np.testing.assert_allclose(g.laplacian().toarray(), [[2, -2], [-2, 2]])
