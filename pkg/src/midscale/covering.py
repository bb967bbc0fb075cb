"""
Covering numbers, ball masses and the inverse-mass integral.

Balls are closed throughout: ``B(z, r) = {y : |y - z| <= r}``.
"""

from __future__ import annotations

import math
from itertools import combinations
from typing import NamedTuple

import numpy as np

from .measures import DiscreteMeasure, as_points
from .sinkhorn import DualSolution


class NetResult(NamedTuple):
    centers: np.ndarray
    delta: float

    @property
    def count(self) -> int:
        return len(self.centers)


def greedy_net(points, delta) -> NetResult:
    """Farthest-point greedy delta-net.

    Starts from index 0 and repeatedly adds the point farthest from the
    current centers (lowest index on ties) until every point is within
    ``delta``. The output is a proper delta-cover and a delta-packing, so its
    size K satisfies ``N(A, delta) <= K <= N(A, delta / 2)``.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    pts = as_points(points)
    dist = np.linalg.norm(pts - pts[0], axis=1)
    centers = [0]
    while True:
        far = int(np.argmax(dist))
        if dist[far] <= delta:
            break
        centers.append(far)
        np.minimum(dist, np.linalg.norm(pts - pts[far], axis=1), out=dist)
    return NetResult(np.array(centers, dtype=int), float(delta))


def _pairwise_dist(P, Q, block=512):
    out = np.empty((P.shape[0], Q.shape[0]))
    for s in range(0, P.shape[0], block):
        diff = P[s : s + block, None, :] - Q[None, :, :]
        out[s : s + block] = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return out


def ball_mass(measure: DiscreteMeasure, z, r) -> float:
    if r < 0:
        raise ValueError("radius must be nonnegative")
    z = np.asarray(z, dtype=float).ravel()
    dist = np.linalg.norm(measure.points - z[None, :], axis=1)
    return float(measure.weights[dist <= r].sum())


def ball_masses(measure: DiscreteMeasure, r, centers=None, block=512) -> np.ndarray:
    """Closed-ball masses around each center (default: the atoms themselves)."""
    P = measure.points
    Z = P if centers is None else as_points(centers)
    out = np.empty(Z.shape[0])
    for s in range(0, Z.shape[0], block):
        D = _pairwise_dist(Z[s : s + block], P)
        out[s : s + block] = (D <= r) @ measure.weights
    return out


def inverse_mass_integral(measure: DiscreteMeasure, delta) -> float:
    """``sum_i w_i / P(B(y_i, delta))``; bounded by the covering number at delta/4."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    w = measure.weights
    if np.ptp(w) == 0:
        # uniform weights: sum_i 1 / count_i, grouped by count so that
        # clustered inputs (where the bound is tight) are summed exactly
        P = measure.points
        counts = np.empty(P.shape[0], dtype=np.int64)
        for s in range(0, P.shape[0], 512):
            counts[s : s + 512] = (_pairwise_dist(P[s : s + 512], P) <= delta).sum(axis=1)
        c, k = np.unique(counts, return_counts=True)
        return math.fsum(float(ki) / float(ci) for ci, ki in zip(c, k))
    return math.fsum(w / ball_masses(measure, delta))


def density_l2_norm(sol: DualSolution) -> float:
    """Squared L2(a ⊗ b) norm of the plan density, ``sum_ij a_i b_j p_ij^2``."""
    E = 2.0 * (sol.f[:, None] + sol.g[None, :] - sol.C) / sol.eps
    E += np.log(sol.a)[:, None] + np.log(sol.b)[None, :]
    mx = E.max()
    return float(np.exp(mx) * np.exp(E - mx).sum())


def density_sup(sol: DualSolution) -> float:
    return float(np.exp(((sol.f[:, None] + sol.g[None, :] - sol.C) / sol.eps).max()))


# ---------------------------------------------------------------------------
# Exact oracles (small inputs only)
# ---------------------------------------------------------------------------


def proper_covering_number(points, delta) -> int:
    """Minimal number of closed delta-balls centered at input points covering them.

    Exhaustive search; intended as a test oracle for n <= 20.
    """
    pts = as_points(points)
    n = pts.shape[0]
    if n > 20:
        raise ValueError("exhaustive covering search is limited to n <= 20")
    cover = _pairwise_dist(pts, pts) <= delta
    masks = [int(sum(1 << j for j in np.nonzero(row)[0])) for row in cover]
    full = (1 << n) - 1
    for k in range(1, n + 1):
        for combo in combinations(range(n), k):
            acc = 0
            for i in combo:
                acc |= masks[i]
            if acc == full:
                return k
    return n


def covering_number_1d(values, delta) -> int:
    """Exact covering number of a finite set of reals by closed delta-intervals."""
    xs = np.sort(np.asarray(values, dtype=float).ravel())
    count, i = 0, 0
    while i < xs.size:
        count += 1
        reach = xs[i] + 2 * delta
        while i < xs.size and xs[i] <= reach:
            i += 1
    return count
