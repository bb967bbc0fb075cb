"""
Log-domain Sinkhorn for the empirical entropic OT problem.

Conventions: potentials ``f`` (length n) and ``g`` (length m) live on the
weights ``a`` and ``b``; the plan density with respect to ``a ⊗ b`` is

    p_ij = exp((f_i + g_j - C_ij) / eps),

and solutions are normalized so that ``b @ g == 0``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 100_000


class ConvergenceError(RuntimeError):
    """Sinkhorn did not reach the requested marginal residual."""

    def __init__(self, residual, iterations, solution=None, context=None):
        msg = f"Sinkhorn did not converge in {iterations} iterations (residual {residual:.3e})"
        super().__init__(f"{context}: {msg}" if context else msg)
        self.context = context
        self.residual = residual
        self.iterations = iterations
        self.solution = solution


@dataclass
class DualSolution:
    f: np.ndarray
    g: np.ndarray
    eps: float
    C: Optional[np.ndarray] = field(default=None, repr=False)
    a: Optional[np.ndarray] = field(default=None, repr=False)
    b: Optional[np.ndarray] = field(default=None, repr=False)
    residual: float = 0.0
    iterations: int = 0
    tol: float = DEFAULT_TOL

    @property
    def value(self) -> float:
        return entropic_value(self)

    def density(self) -> np.ndarray:
        """On-sample density matrix ``p_ij``."""
        return np.exp((self.f[:, None] + self.g[None, :] - self.C) / self.eps)

    def to_json(self) -> str:
        return json.dumps(
            {
                "eps": self.eps,
                "f": self.f.tolist(),
                "g": self.g.tolist(),
                "residual": self.residual,
                "iterations": self.iterations,
            }
        )

    @classmethod
    def from_json(cls, text, C=None, a=None, b=None) -> "DualSolution":
        data = json.loads(text)
        return cls(
            f=np.asarray(data["f"], dtype=float),
            g=np.asarray(data["g"], dtype=float),
            eps=float(data["eps"]),
            C=None if C is None else np.asarray(C, dtype=float),
            a=None if a is None else np.asarray(a, dtype=float),
            b=None if b is None else np.asarray(b, dtype=float),
            residual=float(data["residual"]),
            iterations=int(data["iterations"]),
        )


def _check_weights(w, name):
    w = np.asarray(w, dtype=float).ravel()
    if w.size == 0 or np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise ValueError(f"{name} must be a nonempty vector of positive weights")
    if abs(w.sum() - 1.0) > 1e-10:
        raise ValueError(f"{name} must sum to 1 (got {w.sum()!r})")
    return w


def _check_problem(a, b, C, eps):
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps!r}")
    a = _check_weights(a, "a")
    b = _check_weights(b, "b")
    C = np.asarray(C, dtype=float)
    if C.shape != (a.size, b.size):
        raise ValueError(f"cost matrix has shape {C.shape}, expected {(a.size, b.size)}")
    if not np.all(np.isfinite(C)):
        raise ValueError("cost matrix has non-finite entries")
    return a, b, C


class _LogKernel:
    """Stabilized log-sum-exp reductions of ``-C/eps + v`` along either axis."""

    def __init__(self, C, eps):
        self.K = C * (-1.0 / eps)
        self.buf = np.empty_like(self.K)

    def rows(self, v):
        """log sum_j exp(K_ij + v_j) for each i."""
        buf = self.buf
        np.add(self.K, v[None, :], out=buf)
        mx = buf.max(axis=1)
        mx[~np.isfinite(mx)] = 0.0
        np.subtract(buf, mx[:, None], out=buf)
        np.exp(buf, out=buf)
        return np.log(buf.sum(axis=1)) + mx

    def cols(self, u):
        """log sum_i exp(K_ij + u_i) for each j."""
        buf = self.buf
        np.add(self.K, u[:, None], out=buf)
        mx = buf.max(axis=0)
        mx[~np.isfinite(mx)] = 0.0
        np.subtract(buf, mx[None, :], out=buf)
        np.exp(buf, out=buf)
        return np.log(buf.sum(axis=0)) + mx


def _lse_rows(M):
    mx = M.max(axis=1)
    return np.log(np.exp(M - mx[:, None]).sum(axis=1)) + mx


def _lse_cols(M):
    return _lse_rows(M.T)


def marginal_residual(f, g, a, b, C, eps) -> float:
    """L∞ error in both marginal equations, ``max |sum_j b_j p_ij - 1|`` and its transpose."""
    la, lb = np.log(a), np.log(b)
    E = (f[:, None] + g[None, :] - C) / eps
    row = np.expm1(_lse_rows(E + lb[None, :]))
    col = np.expm1(_lse_cols(E + la[:, None]))
    return float(max(np.abs(row).max(), np.abs(col).max()))


def solve(a, b, C, eps, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, g0=None) -> DualSolution:
    """Solve the empirical entropic OT dual by alternating log-domain updates.

    Parameters
    ----------
    a, b : array, shape (n,), (m,)
        Positive weights summing to one.
    C : array, shape (n, m)
        Cost matrix.
    eps : float
        Regularization strength, > 0.
    tol : float
        Target L∞ marginal residual on both marginals.
    max_iter : int
        Maximum number of (f, g) sweeps.
    g0 : array, shape (m,), optional
        Initial ``g`` (warm start). The fixed point does not depend on it.

    Returns
    -------
    DualSolution
        Potentials normalized so that ``b @ g == 0``.

    Raises
    ------
    ConvergenceError
        If the residual is still above ``tol`` after ``max_iter`` sweeps.
    """
    a, b, C = _check_problem(a, b, C, eps)
    if not tol > 0:
        raise ValueError("tol must be positive")
    la, lb = np.log(a), np.log(b)
    ker = _LogKernel(C, eps)
    g = np.zeros(b.size) if g0 is None else np.array(g0, dtype=float)
    f = -eps * ker.rows(lb + g / eps)
    residual = np.inf
    it = 0
    while it < max_iter:
        it += 1
        g = -eps * ker.cols(la + f / eps)
        f_next = -eps * ker.rows(lb + g / eps)
        # with g exact for f, row i of the plan sums to exp((f_i - f_next_i)/eps)
        row_res = float(np.abs(np.expm1((f - f_next) / eps)).max())
        if row_res <= tol:
            residual = marginal_residual(f, g, a, b, C, eps)
            if residual <= tol:
                break
        f = f_next
    else:
        residual = marginal_residual(f, g, a, b, C, eps)
    del ker
    shift = float(b @ g)
    g = g - shift
    f = f + shift
    sol = DualSolution(f=f, g=g, eps=float(eps), C=C, a=a, b=b, residual=residual, iterations=it, tol=tol)
    if residual > tol:
        raise ConvergenceError(residual, it, sol)
    return sol


def dual_objective(f, g, a, b, C, eps) -> float:
    """Entropic dual ``a·f + b·g - eps * (sum_ij a_i b_j p_ij - 1)``."""
    f, g = np.asarray(f, dtype=float), np.asarray(g, dtype=float)
    a, b, C = _check_problem(a, b, C, eps)
    E = (f[:, None] + g[None, :] - C) / eps + np.log(a)[:, None] + np.log(b)[None, :]
    mx = E.max()
    log_mass = np.log(np.exp(E - mx).sum()) + mx
    return float(a @ f + b @ g - eps * np.expm1(log_mass))


def dual_gradient(f, g, a, b, C, eps):
    """Marginal errors ``1 - sum_j b_j p_ij`` and ``1 - sum_i a_i p_ij``.

    This is the gradient with respect to the ``L2(a) x L2(b)`` inner product.
    """
    f, g = np.asarray(f, dtype=float), np.asarray(g, dtype=float)
    a, b, C = _check_problem(a, b, C, eps)
    E = (f[:, None] + g[None, :] - C) / eps
    gf = -np.expm1(_lse_rows(E + np.log(b)[None, :]))
    gg = -np.expm1(_lse_cols(E + np.log(a)[:, None]))
    return gf, gg


def round_f(g, C, b, eps) -> np.ndarray:
    """Potential ``f`` that exactly satisfies the first marginal equation given ``g``."""
    g = np.asarray(g, dtype=float)
    C = np.asarray(C, dtype=float)
    b = np.asarray(b, dtype=float)
    return -eps * _lse_rows((g[None, :] - C) / eps + np.log(b)[None, :])


def round_g(f, C, a, eps) -> np.ndarray:
    """Potential ``g`` that exactly satisfies the second marginal equation given ``f``."""
    return round_f(f, np.asarray(C, dtype=float).T, a, eps)


def entropic_value(sol: DualSolution) -> float:
    return float(sol.a @ sol.f + sol.b @ sol.g)


def semi_rounded_objective(g, a, b, C, eps) -> float:
    """Dual objective with ``f`` rounded: ``a·round_f(g) + b·g``."""
    g = np.asarray(g, dtype=float)
    a, b, C = _check_problem(a, b, C, eps)
    return float(a @ round_f(g, C, b, eps) + b @ g)
