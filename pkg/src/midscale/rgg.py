"""
Random geometric graph over a sample, its Dirichlet form and spectral gap,
and a quadratic-growth diagnostic for the empirical dual.

Conventions. Edges join ``j != k`` with ``|y_j - y_k| < delta`` (strict). All
edges carry the weight ``w = c_rgg / (n * delta**(d_nu + 2))``. The Dirichlet
form sums over ordered pairs,

    D(alpha) = (1/n) * sum_{j ~ k} w * (alpha_k - alpha_j)**2,

so with the graph Laplacian ``L = w * (Deg - A)`` one has
``D(alpha) = (2/n) alpha^T L alpha`` and ``D(alpha) >= 2 * lambda2 * var(alpha)``,
where ``var`` is the uniform-weight variance. ``PAIR_FACTOR`` is that 2.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import eigsh

from .measures import as_points
from .sinkhorn import DualSolution, semi_rounded_objective

PAIR_FACTOR = 2.0
DENSE_EIG_LIMIT = 2000


@dataclass
class RggGraph:
    adjacency: sp.csr_matrix
    weight: float
    delta: float
    d_nu: int

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_edges(self) -> int:
        return self.adjacency.nnz // 2

    def laplacian(self) -> sp.csr_matrix:
        A = self.adjacency.astype(float)
        deg = np.asarray(A.sum(axis=1)).ravel()
        return (self.weight * (sp.diags(deg) - A)).tocsr()


def build_rgg(points, delta, d_nu, c_rgg=1.0) -> RggGraph:
    if not delta > 0:
        raise ValueError("delta must be positive")
    Y = as_points(points)
    n = Y.shape[0]
    rows, cols = [], []
    block = 512
    for s in range(0, n, block):
        diff = Y[s : s + block, None, :] - Y[None, :, :]
        D = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        i, j = np.nonzero(D < delta)
        i = i + s
        keep = i != j
        rows.append(i[keep])
        cols.append(j[keep])
    rows, cols = np.concatenate(rows), np.concatenate(cols)
    A = sp.csr_matrix((np.ones(rows.size, dtype=bool), (rows, cols)), shape=(n, n))
    w = c_rgg / (n * delta ** (d_nu + 2))
    return RggGraph(A, float(w), float(delta), int(d_nu))


def dirichlet_form(graph: RggGraph, alpha) -> float:
    alpha = np.asarray(alpha, dtype=float).ravel()
    if alpha.size != graph.n:
        raise ValueError("alpha has the wrong length")
    coo = graph.adjacency.tocoo()
    diffs = alpha[coo.col] - alpha[coo.row]
    return float(graph.weight * np.sum(diffs**2) / graph.n)


class SpectralGap(NamedTuple):
    lambda2: float
    n_components: int

    @property
    def connected(self) -> bool:
        return self.n_components == 1


def lambda2(graph: RggGraph) -> SpectralGap:
    """Second-smallest eigenvalue of the graph Laplacian ``w * (Deg - A)``.

    Disconnected graphs have ``lambda2 == 0``; ``n_components`` flags them.
    """
    n = graph.n
    if n < 2:
        raise ValueError("lambda2 needs at least two points")
    ncomp, _ = connected_components(graph.adjacency, directed=False)
    if ncomp > 1:
        return SpectralGap(0.0, int(ncomp))
    L = graph.laplacian()
    if n <= DENSE_EIG_LIMIT:
        vals = np.linalg.eigvalsh(L.toarray())
    else:
        vals = eigsh(L, k=2, sigma=-1e-3 * graph.weight, which="LM", return_eigenvectors=False)
        vals = np.sort(vals)
    return SpectralGap(float(max(vals[1], 0.0)), 1)


def uniform_variance(alpha) -> float:
    alpha = np.asarray(alpha, dtype=float)
    return float(np.mean((alpha - alpha.mean()) ** 2))


# ---------------------------------------------------------------------------
# Quadratic growth diagnostic
# ---------------------------------------------------------------------------


@dataclass
class QGResult:
    t_grid: np.ndarray
    deficits: np.ndarray  # (directions, len(t_grid))
    coefficients: np.ndarray  # fitted deficit ~ coef * t^2

    @property
    def ratios(self) -> np.ndarray:
        return self.deficits / self.t_grid[None, :] ** 2

    def ratio_spread(self) -> np.ndarray:
        """Per direction, ``(max - min) / min`` of ``deficit / t^2``."""
        r = self.ratios
        return (r.max(axis=1) - r.min(axis=1)) / r.min(axis=1)

    def csv_text(self) -> str:
        """Columns ``direction_id, t, deficit, fitted_coeff``, one row per (direction, t)."""
        lines = ["direction_id,t,deficit,fitted_coeff"]
        for i, (row, coef) in enumerate(zip(self.deficits, self.coefficients)):
            for t, dval in zip(self.t_grid, row):
                lines.append(f"{i},{float(t)!r},{float(dval)!r},{float(coef)!r}")
        return "\n".join(lines) + "\n"


def qg_diagnostic(
    sol: DualSolution,
    directions=20,
    t_grid: Sequence[float] = (1e-3, 2e-3, 4e-3),
    seed=0,
    t_fit_max=None,
) -> QGResult:
    """Deficits of the f-rounded dual along directions through the optimum.

    ``directions`` is either a count (random Gaussian directions centered
    under ``b`` and normalized in ``L2(b)``) or an explicit array of shape
    ``(k, m)`` whose rows must be centered under ``b``. For each direction the
    deficit ``Psi(g) - Psi(g + t*alpha)`` is evaluated on ``t_grid`` and a
    quadratic through the origin is fitted to the points with
    ``t <= t_fit_max`` (all points by default).
    """
    b = sol.b
    if np.isscalar(directions):
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((int(directions), b.size))
        A -= (A @ b)[:, None]
        norms = np.sqrt((A**2) @ b)
        A /= np.where(norms > 0, norms, 1.0)[:, None]
    else:
        A = np.atleast_2d(np.asarray(directions, dtype=float))
        if A.shape[1] != b.size:
            raise ValueError("directions have the wrong length")
        scale = np.maximum(1.0, np.abs(A).max(axis=1))
        if np.any(np.abs(A @ b) > 1e-12 * scale):
            raise ValueError("directions must be centered: b @ alpha == 0")
    t = np.asarray(t_grid, dtype=float)
    base = semi_rounded_objective(sol.g, sol.a, b, sol.C, sol.eps)
    deficits = np.empty((A.shape[0], t.size))
    for i, alpha in enumerate(A):
        for k, tk in enumerate(t):
            if tk == 0:
                deficits[i, k] = 0.0
            else:
                deficits[i, k] = base - semi_rounded_objective(sol.g + tk * alpha, sol.a, b, sol.C, sol.eps)
    fit = t <= (t.max() if t_fit_max is None else t_fit_max)
    t2 = t[fit] ** 2
    denom = float(t2 @ t2)
    coef = deficits[:, fit] @ t2 / denom if denom > 0 else np.zeros(A.shape[0])
    return QGResult(t, deficits, coef)
