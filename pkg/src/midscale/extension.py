"""
Out-of-sample extensions of solved empirical dual potentials.

The extensions solve the marginal equations for a new point, e.g.

    f(x) = -eps * log sum_j b_j exp(-(c(x, y_j) - g_j) / eps),

so they reproduce the solved potentials on the samples (up to the solver
residual) and inherit the Lipschitz constant of the cost.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp, softmax

from .measures import CostSpec, as_points
from .sinkhorn import DualSolution


def _batch(points, d):
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    pts = as_points(pts[None, :] if single else pts)
    if pts.shape[1] != d:
        raise ValueError(f"expected points in dimension {d}, got {pts.shape[1]}")
    return pts, single


class ExtendedPotentials:
    """Canonical extensions of a :class:`DualSolution` over its supports.

    Parameters
    ----------
    solution : DualSolution
        Solved potentials; ``solution.a`` and ``solution.b`` are the weights.
    X, Y : array, shape (n, d), (m, d)
        Supports the solution was computed on.
    cost : CostSpec
        Frozen cost (its ``scale`` must be the one used to build ``solution.C``).

    Every method accepts a single point or a batch of points (one per row).
    """

    def __init__(self, solution: DualSolution, X, Y, cost: CostSpec):
        if cost.scale is None:
            raise ValueError("cost must be frozen (scale set)")
        self.solution = solution
        self.X = as_points(X)
        self.Y = as_points(Y)
        self.cost = cost
        if self.X.shape[0] != solution.f.size or self.Y.shape[0] != solution.g.size:
            raise ValueError("supports do not match the potentials")
        self._la = np.log(solution.a)
        self._lb = np.log(solution.b)

    @property
    def eps(self):
        return self.solution.eps

    @property
    def d(self):
        return self.X.shape[1]

    def _logits_x(self, xs):
        # (k, m): log b_j + (g_j - c(x, y_j)) / eps
        s = self.solution
        return self._lb[None, :] + (s.g[None, :] - self.cost(xs, self.Y)) / s.eps

    def _logits_y(self, ys):
        # (k, n): log a_i + (f_i - c(x_i, y)) / eps
        s = self.solution
        return self._la[None, :] + (s.f[None, :] - self.cost(self.X, ys).T) / s.eps

    def extend_f(self, x):
        xs, single = _batch(x, self.d)
        out = -self.eps * logsumexp(self._logits_x(xs), axis=1)
        return out[0] if single else out

    def extend_g(self, y):
        ys, single = _batch(y, self.d)
        out = -self.eps * logsumexp(self._logits_y(ys), axis=1)
        return out[0] if single else out

    def density(self, x, y):
        """Extended plan density ``p(x, y)``; a matrix for batched inputs."""
        xs, sx = _batch(x, self.d)
        ys, sy = _batch(y, self.d)
        F = self.extend_f(xs)
        G = self.extend_g(ys)
        p = np.exp((F[:, None] + G[None, :] - self.cost(xs, ys)) / self.eps)
        if sx and sy:
            return p[0, 0]
        if sx:
            return p[0]
        if sy:
            return p[:, 0]
        return p

    def entropic_map(self, x):
        """Conditional mean of ``y`` under the plan: ``sum_j b_j y_j p(x, y_j)``."""
        xs, single = _batch(x, self.d)
        T = softmax(self._logits_x(xs), axis=1) @ self.Y
        return T[0] if single else T

    def map_gradient_g(self, y):
        """Gradient of the extended ``g``: ``sum_i a_i grad_y c(x_i, y) p(x_i, y)``."""
        ys, single = _batch(y, self.d)
        W = softmax(self._logits_y(ys), axis=1)
        out = np.empty_like(ys)
        for k, yk in enumerate(ys):
            out[k] = self.cost.scale * (W[k] @ self.cost.grad_y_raw(self.X, yk))
        return out[0] if single else out
