"""
Monte Carlo rate experiments.

Population quantities are replaced by a dense plug-in oracle (an m-point
discretization of each law, solved to a tight tolerance). Each experiment
draws fresh iid samples per replicate, records an error per replicate and
fits a log-log slope of the mean error against the grid variable.

Replicate ``r`` at grid value ``v`` of experiment ``name`` uses the seed
``SeedSequence([base_seed, crc32(name), v, r])``.
"""

from __future__ import annotations

import csv
import io
import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .covering import ball_masses, density_l2_norm, density_sup, inverse_mass_integral
from .extension import ExtendedPotentials
from .measures import (
    CostSpec,
    DiscreteMeasure,
    GeneratorSpec,
    as_points,
    cost_matrix,
    discretize,
    empirical_measure,
    generate,
)
from .rgg import PAIR_FACTOR, build_rgg, dirichlet_form, lambda2, uniform_variance
from .sinkhorn import ConvergenceError, DualSolution, dual_gradient, dual_objective, solve

ORACLE_RATIO = 6
ORACLE_TOL = 1e-10
MIN_REPS = 10


# ---------------------------------------------------------------------------
# Slopes and tables
# ---------------------------------------------------------------------------


def fit_loglog_slope(xs, ys):
    """OLS slope of log10(y) on log10(x) and its standard error."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError("xs and ys must be 1-d arrays of equal length")
    if xs.size < 3:
        raise ValueError("slope fitting needs at least 3 points")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("log-log fitting needs strictly positive inputs")
    u, v = np.log10(xs), np.log10(ys)
    du = u - u.mean()
    sxx = float(du @ du)
    slope = float(du @ (v - v.mean()) / sxx)
    intercept = v.mean() - slope * u.mean()
    resid = v - intercept - slope * u
    if xs.size > 2:
        stderr = math.sqrt(float(resid @ resid) / (xs.size - 2) / sxx)
    else:
        stderr = float("nan")
    return slope, stderr


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


@dataclass
class RateTable:
    """Replicate errors on a grid plus the fitted log-log slope of their means."""

    experiment: str
    grid_var: str
    grid: list
    errors: list  # one array of replicate errors per grid value
    slope: Optional[float] = None
    stderr: Optional[float] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.errors = [np.asarray(e, dtype=float) for e in self.errors]
        if self.slope is None:
            self.fit()

    def means(self) -> np.ndarray:
        return np.array([e.mean() for e in self.errors])

    def standard_errors(self) -> np.ndarray:
        return np.array([e.std(ddof=1) / math.sqrt(e.size) if e.size > 1 else np.nan for e in self.errors])

    def fit(self, ys=None, xs=None):
        """Fit the slope of ``ys`` (default: mean errors) against the grid."""
        ys = self.means() if ys is None else np.asarray(ys, dtype=float)
        xs = np.asarray(self.grid, dtype=float) if xs is None else np.asarray(xs, dtype=float)
        flags = self.metadata.setdefault("flags", [])
        if len(self.grid) < 3:
            if "degenerate_grid" not in flags:
                flags.append("degenerate_grid")
            self.slope = self.stderr = None
            return
        if np.any(ys <= 0):
            if "nonpositive_mean" not in flags:
                flags.append("nonpositive_mean")
            self.slope = self.stderr = None
            return
        self.slope, self.stderr = fit_loglog_slope(xs, ys)

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["experiment", "grid_var", "grid_value", "rep", "error"])
        for value, errs in zip(self.grid, self.errors):
            for r, e in enumerate(errs):
                w.writerow([self.experiment, self.grid_var, _fmt(value), r, _fmt(e)])
        return buf.getvalue()

    def sidecar(self, **extra) -> dict:
        return {
            "experiment": self.experiment,
            "grid_var": self.grid_var,
            "grid": [float(v) for v in self.grid],
            "mean_errors": [float(v) for v in self.means()],
            "slope": self.slope,
            "stderr": self.stderr,
            "metadata": _jsonable(self.metadata),
            **extra,
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def replicate_seed(base_seed, experiment, value, rep) -> np.random.SeedSequence:
    tag = zlib.crc32(experiment.encode())
    v = int(round(value * 1_000_000)) if isinstance(value, float) else int(value)
    return np.random.SeedSequence([int(base_seed), tag, v, int(rep)])


def _child_seeds(ss: np.random.SeedSequence, k):
    return [np.random.default_rng(s) for s in ss.spawn(k)]


def _pmap(fn, items, threads=1):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# Oracle
# ---------------------------------------------------------------------------


@dataclass
class OracleSolution:
    spec_x: GeneratorSpec
    spec_y: GeneratorSpec
    mu: DiscreteMeasure
    nu: DiscreteMeasure
    cost: CostSpec  # frozen
    solution: DualSolution
    m: int
    seed: int

    @property
    def eps(self) -> float:
        return self.solution.eps

    @property
    def value(self) -> float:
        return float(self.solution.a @ self.solution.f + self.solution.b @ self.solution.g)

    @property
    def potentials(self) -> ExtendedPotentials:
        if not hasattr(self, "_potentials"):
            self._potentials = ExtendedPotentials(self.solution, self.mu.points, self.nu.points, self.cost)
        return self._potentials


def population_oracle(
    spec_x: GeneratorSpec,
    spec_y: GeneratorSpec,
    m: int,
    eps: float,
    cost: CostSpec = CostSpec(),
    seed=0,
    tol=ORACLE_TOL,
    sampler="qmc",
    max_iter=100_000,
) -> OracleSolution:
    """Dense plug-in stand-in for the population problem.

    ``sampler='qmc'`` uses a scrambled Halton discretization (finite supports
    are always exact); ``sampler='iid'`` uses plain iid draws. The rescale
    factor is computed from the oracle clouds unless ``cost`` is already
    frozen, and is reused by every experiment built on this oracle.
    """
    ss = np.random.SeedSequence([int(seed), zlib.crc32(b"oracle"), int(m)])
    sx, sy = ss.spawn(2)
    if sampler == "qmc":
        mu, nu = discretize(spec_x, m, sx), discretize(spec_y, m, sy)
    elif sampler == "iid":
        mu = _iid_measure(spec_x, m, sx)
        nu = _iid_measure(spec_y, m, sy)
    else:
        raise ValueError(f"unknown oracle sampler {sampler!r}")
    frozen = cost if cost.scale is not None and cost.lipschitz is not None else cost.freeze(mu.points, nu.points)
    C = frozen(mu.points, nu.points)
    sol = solve(mu.weights, nu.weights, C, eps, tol=tol, max_iter=max_iter)
    return OracleSolution(spec_x, spec_y, mu, nu, frozen, sol, int(m), int(seed))


def _iid_measure(spec, m, seed):
    if spec.kind == "finite-support":
        return discretize(spec, m, seed)
    return empirical_measure(generate(spec, m, seed))


def oracle_self_consistency(oracle: OracleSolution, factor=2, sampler="qmc") -> float:
    """``|S_ref(m) - S_ref(factor * m)|`` with the same frozen cost."""
    bigger = population_oracle(
        oracle.spec_x,
        oracle.spec_y,
        factor * oracle.m,
        oracle.eps,
        oracle.cost,
        seed=oracle.seed,
        tol=oracle.solution.tol,
        sampler=sampler,
    )
    return abs(bigger.value - oracle.value)


# ---------------------------------------------------------------------------
# Replicates
# ---------------------------------------------------------------------------


@dataclass
class Replicate:
    X: np.ndarray
    Y: np.ndarray
    C: np.ndarray
    solution: DualSolution
    potentials: ExtendedPotentials
    rng: np.random.Generator  # for any extra draws


def _draw_replicate(spec_x, spec_y, cost, n, eps, ss, tol, context) -> Replicate:
    rx, ry, rest = _child_seeds(ss, 3)
    X = generate(spec_x, n, rx)
    Y = generate(spec_y, n, ry)
    C = cost(X, Y)
    w = np.full(n, 1.0 / n)
    try:
        sol = solve(w, w, C, eps, tol=tol)
    except ConvergenceError as exc:
        raise ConvergenceError(exc.residual, exc.iterations, exc.solution, context=context) from None
    return Replicate(X, Y, C, sol, ExtendedPotentials(sol, X, Y, cost), rest)


def _check_grid(oracle, n_grid, reps, flags):
    n_grid = [int(n) for n in n_grid]
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ValueError("n-grid must be strictly ascending")
    if oracle is not None and oracle.m < ORACLE_RATIO * max(n_grid):
        raise ValueError(
            f"oracle m={oracle.m} is below {ORACLE_RATIO} x largest n ({max(n_grid)})"
        )
    if reps < MIN_REPS:
        flags.append("reps_below_minimum")
    return n_grid


def _run_grid(name, oracle, n_grid, reps, seed, per_replicate, tol, threads, extra_meta=None):
    flags = []
    n_grid = _check_grid(oracle, n_grid, reps, flags)

    def task(item):
        n, r = item
        ss = replicate_seed(seed, name, n, r)
        rep = _draw_replicate(
            oracle.spec_x, oracle.spec_y, oracle.cost, n, oracle.eps, ss, tol,
            context=f"{name} n={n} rep={r}",
        )
        return per_replicate(rep)

    items = [(n, r) for n in n_grid for r in range(reps)]
    results = _pmap(task, items, threads)
    per_n = [results[i * reps : (i + 1) * reps] for i in range(len(n_grid))]
    meta = {
        "eps": oracle.eps,
        "oracle_m": oracle.m,
        "oracle_value": oracle.value,
        "rescale_factor": oracle.cost.scale,
        "lipschitz": oracle.cost.effective_lipschitz,
        "base_seed": int(seed),
        "reps": int(reps),
        "spec_x": oracle.spec_x.to_dict(),
        "spec_y": oracle.spec_y.to_dict(),
        "flags": flags,
    }
    if extra_meta:
        meta.update(extra_meta)
    return n_grid, per_n, meta


# ---------------------------------------------------------------------------
# Experiments on an oracle
# ---------------------------------------------------------------------------


def value_rate_experiment(oracle, n_grid, reps, seed=0, tol=1e-9, threads=1) -> RateTable:
    """``|S(mu_n, nu_n) - S_ref|`` against n.

    Also records, per n, the mean of ``n * |grad Phi_n(f_ref, g_ref)|^2 / |p_ref|^2``
    (the variance identity for the empirical gradient at the oracle potentials).
    """
    S_ref = oracle.value
    p2_ref = density_l2_norm(oracle.solution)
    pot = oracle.potentials

    def per_rep(rep):
        n = rep.X.shape[0]
        S = float(rep.solution.a @ rep.solution.f + rep.solution.b @ rep.solution.g)
        gf, gg = dual_gradient(pot.extend_f(rep.X), pot.extend_g(rep.Y), rep.solution.a, rep.solution.b, rep.C, oracle.eps)
        ratio = n * (np.mean(gf**2) + np.mean(gg**2)) / p2_ref
        return abs(S - S_ref), ratio

    n_grid, per_n, meta = _run_grid("value_rate", oracle, n_grid, reps, seed, per_rep, tol, threads)
    errors = [[e for e, _ in res] for res in per_n]
    meta["gradient_variance_ratio"] = [float(np.mean([q for _, q in res])) for res in per_n]
    meta["oracle_density_l2"] = p2_ref
    return RateTable("value_rate", "n", n_grid, errors, metadata=meta)


def bias_experiment(oracle, n_grid, reps, seed=0, tol=1e-9, threads=1) -> RateTable:
    """Bias of the empirical entropic value against n.

    Two per-replicate estimators of ``E[S(mu_n, nu_n)] - S_ref`` are recorded:

    * direct: ``S(mu_n, nu_n) - S_ref``;
    * paired: ``S(mu_n, nu_n) - Phi_n(f_ref, g_ref)``, the gap between the
      empirical dual at its maximizer and at the (extended) oracle
      potentials. Since ``E[Phi_n(f, g)] = Phi(f, g)`` for fixed potentials,
      it has the same expectation, is nonnegative replicate by replicate, and
      its fluctuations are O(1/n) instead of O(1/sqrt(n)).

    The table stores the paired errors and fits the slope of their mean. The
    sign check (mean + 2 se >= 0) uses the direct estimator, which does not
    have a sign built in.
    """
    S_ref = oracle.value
    pot = oracle.potentials

    def per_rep(rep):
        sol = rep.solution
        S = float(sol.a @ sol.f + sol.b @ sol.g)
        phi_ref = dual_objective(pot.extend_f(rep.X), pot.extend_g(rep.Y), sol.a, sol.b, rep.C, oracle.eps)
        return S - phi_ref, S - S_ref

    n_grid, per_n, meta = _run_grid("bias", oracle, n_grid, reps, seed, per_rep, tol, threads)
    direct = RateTable("bias_direct", "n", n_grid, [[d for _, d in r] for r in per_n], slope=float("nan"))
    means, se = direct.means(), direct.standard_errors()
    meta["estimator"] = "paired"
    meta["direct_mean_bias"] = means.tolist()
    meta["direct_stderr"] = se.tolist()
    meta["nonnegative_within_2se"] = [bool(m + 2 * s >= 0) for m, s in zip(means, se)]
    if not all(meta["nonnegative_within_2se"]):
        meta["flags"].append("negative_bias")
    return RateTable("bias", "n", n_grid, [[p for p, _ in r] for r in per_n], metadata=meta)


def map_error_experiment(oracle, n_grid, reps, seed=0, tol=1e-9, threads=1) -> RateTable:
    """``|T_n - T_ref|^2`` in ``L2(mu_n)`` against n."""
    pot = oracle.potentials

    def per_rep(rep):
        diff = rep.potentials.entropic_map(rep.X) - pot.entropic_map(rep.X)
        return float(np.mean(np.sum(diff**2, axis=1)))

    n_grid, per_n, meta = _run_grid("map_error", oracle, n_grid, reps, seed, per_rep, tol, threads)
    return RateTable("map_error", "n", n_grid, per_n, metadata=meta)


def density_error_experiment(oracle, n_grid, reps, seed=0, tol=1e-9, threads=1, n_eval=500):
    """Density errors against n.

    Returns two tables: ``density_l1`` (on-sample ``L1(mu_n ⊗ nu_n)`` error
    against the oracle's extended density) and ``density_l2`` (squared L2
    error on ``n_eval`` fresh draws from each law, both densities extended).
    """
    pot = oracle.potentials

    def per_rep(rep):
        p_hat = rep.solution.density()
        p_ref = pot.density(rep.X, rep.Y)
        l1 = float(np.mean(np.abs(p_hat - p_ref)))
        gx, gy = _child_seeds(np.random.SeedSequence(rep.rng.integers(2**63)), 2)
        Xf = generate(oracle.spec_x, n_eval, gx)
        Yf = generate(oracle.spec_y, n_eval, gy)
        l2 = float(np.mean((rep.potentials.density(Xf, Yf) - pot.density(Xf, Yf)) ** 2))
        return l1, l2

    n_grid, per_n, meta = _run_grid("density_error", oracle, n_grid, reps, seed, per_rep, tol, threads)
    meta_l2 = dict(meta, n_eval=n_eval, flags=list(meta["flags"]))
    t1 = RateTable("density_l1", "n", n_grid, [[a for a, _ in r] for r in per_n], metadata=meta)
    t2 = RateTable("density_l2", "n", n_grid, [[b for _, b in r] for r in per_n], metadata=meta_l2)
    return t1, t2


def aligned_reference(pot: ExtendedPotentials, X, Y):
    """Oracle potentials at the samples, shifted to the sample's convention.

    The shift ``s`` is the sample mean of the extended oracle ``g``; the
    reference pair is ``(f_ref + s, g_ref - s)``, which leaves the density
    unchanged and has ``mean(g) == 0`` on the sample.
    """
    F, G = pot.extend_f(X), pot.extend_g(Y)
    s = float(G.mean())
    return F + s, G - s, s


def potential_error_experiment(oracle, n_grid, reps, seed=0, tol=1e-9, threads=1) -> RateTable:
    """``|f_n - f_ref|^2_{L2(mu_n)} + |g_n - g_ref|^2_{L2(nu_n)}`` after shift alignment."""
    pot = oracle.potentials

    def per_rep(rep):
        F, G, _ = aligned_reference(pot, rep.X, rep.Y)
        return float(np.mean((rep.solution.f - F) ** 2) + np.mean((rep.solution.g - G) ** 2))

    n_grid, per_n, meta = _run_grid("potential_error", oracle, n_grid, reps, seed, per_rep, tol, threads)
    meta["note"] = "only the n-exponent is tested; the (L/eps) exponents are not resolvable here"
    return RateTable("potential_error", "n", n_grid, per_n, metadata=meta)


# ---------------------------------------------------------------------------
# Epsilon scan
# ---------------------------------------------------------------------------


def geometric_grid(lo, hi, ratio=math.sqrt(2)) -> list:
    """Geometric grid from ``lo`` up to at most ``hi``."""
    k = int(math.floor(math.log(hi / lo) / math.log(ratio) + 1e-9))
    return [lo * ratio**i for i in range(k + 1)]


def eps_scan_experiment(spec_x, spec_y, n_dense, eps_grid, seed=0, cost=CostSpec(), tol=1e-9) -> dict:
    """Scale dependence of the plan density on one dense sample pair.

    For each eps (solved from largest to smallest, warm-starting ``g``)
    records the squared L2 norm of the density, its maximum over the sample,
    and the smallest ``nu_n``-mass of a closed ball of radius ``eps / L``
    around a sample point. Slopes are taken against ``L / eps``. The metadata
    also records the covering-chain check
    ``|p|^2 <= e^8 * min(inverse-mass integrals at 4 eps / L)``.
    """
    ss = np.random.SeedSequence([int(seed), zlib.crc32(b"eps_scan"), int(n_dense)])
    rx, ry = _child_seeds(ss, 2)
    X = generate(spec_x, n_dense, rx)
    Y = generate(spec_y, n_dense, ry)
    mu, nu = empirical_measure(X), empirical_measure(Y)
    C, L, scale = cost_matrix(X, Y, cost)
    eps_sorted = sorted((float(e) for e in eps_grid), reverse=True)
    rows = {}
    g = None
    chain = []
    for eps in eps_sorted:
        sol = solve(mu.weights, nu.weights, C, eps, tol=tol, g0=g)
        g = sol.g
        p2 = density_l2_norm(sol)
        sup = density_sup(sol)
        min_ball = float(ball_masses(nu, eps / L).min())
        bound = math.exp(8) * min(inverse_mass_integral(mu, 4 * eps / L), inverse_mass_integral(nu, 4 * eps / L))
        chain.append(bool(p2 <= bound))
        rows[eps] = (p2, sup, min_ball, sol.iterations)
    grid = sorted(rows)
    xs = [L / e for e in grid]
    meta = {
        "n_dense": int(n_dense),
        "lipschitz": L,
        "rescale_factor": scale,
        "base_seed": int(seed),
        "spec_x": spec_x.to_dict(),
        "spec_y": spec_y.to_dict(),
        "intrinsic_dims": [spec_x.intrinsic_dim, spec_y.intrinsic_dim],
        "iterations": [rows[e][3] for e in grid],
        "covering_chain_holds": chain[::-1],
        "slope_against": "L/eps",
    }
    out = {}
    for key, idx in (("density_l2", 0), ("density_sup", 1), ("min_ball_mass", 2)):
        t = RateTable(f"eps_scan_{key}", "eps", grid, [[rows[e][idx]] for e in grid],
                      slope=float("nan"), metadata=dict(meta, flags=[]))
        t.fit(xs=xs)
        out[key] = t
    return out


# ---------------------------------------------------------------------------
# W1 experiments
# ---------------------------------------------------------------------------


def exact_ot_value(X, Y, cost: CostSpec) -> float:
    """Unregularized OT value between two uniform clouds of equal size.

    Solved exactly as an assignment problem; ``cost`` should be frozen so the
    value is on the same scale as the entropic values it is compared with.
    """
    if isinstance(X, DiscreteMeasure) or isinstance(Y, DiscreteMeasure):
        for M in (X, Y):
            if isinstance(M, DiscreteMeasure) and np.ptp(M.weights) > 1e-15:
                raise ValueError("exact_ot_value needs uniform weights")
        X = X.points if isinstance(X, DiscreteMeasure) else X
        Y = Y.points if isinstance(Y, DiscreteMeasure) else Y
    X, Y = as_points(X), as_points(Y)
    if X.shape[0] != Y.shape[0]:
        raise ValueError("exact_ot_value needs supports of equal size")
    C = cost(X, Y) if cost.scale is not None else cost_matrix(X, Y, cost).matrix
    rows, cols = linear_sum_assignment(C)
    return float(C[rows, cols].mean())


def _w1_cost(spec_x, spec_y, cost):
    if cost is None:
        return CostSpec.for_supports("euclidean", spec_x, spec_y)
    if cost.scale is None or cost.lipschitz is None:
        raise ValueError("W1 experiments need a frozen cost")
    return cost


def w1_schedule_experiment(spec_x, spec_y, n_grid, reps, seed=0, cost=None, tol=1e-9, threads=1) -> RateTable:
    """``|S_eps(n)(mu_n, nu_n) - W(mu_n, nu_n)|`` with ``eps(n) = n^(-1/(d+2))``.

    When both laws coincide the population value ``W(mu, nu)`` is 0, and the
    metadata also records the mean of ``|S_eps(n)(mu_n, nu_n) - W(mu, nu)|``.
    """
    cost = _w1_cost(spec_x, spec_y, cost)
    d = spec_x.d
    flags = []
    n_grid = _check_grid(None, n_grid, reps, flags)

    def task(item):
        n, r = item
        eps = n ** (-1.0 / (d + 2))
        rep = _draw_replicate(spec_x, spec_y, cost, n, eps, replicate_seed(seed, "w1_schedule", n, r), tol,
                              context=f"w1_schedule n={n} rep={r}")
        S = float(rep.solution.a @ rep.solution.f + rep.solution.b @ rep.solution.g)
        return abs(S - exact_ot_value(rep.X, rep.Y, cost)), S

    items = [(n, r) for n in n_grid for r in range(reps)]
    res = _pmap(task, items, threads)
    errors = [[e for e, _ in res[i * reps : (i + 1) * reps]] for i in range(len(n_grid))]
    means = [float(np.mean(e)) for e in errors]
    same_law = spec_x.to_dict() == spec_y.to_dict()
    pop = [float(np.mean([abs(S) for _, S in res[i * reps : (i + 1) * reps]])) for i in range(len(n_grid))]
    meta = {
        "eps": [n ** (-1.0 / (d + 2)) for n in n_grid],
        "rescale_factor": cost.scale,
        "base_seed": int(seed),
        "reps": int(reps),
        "spec_x": spec_x.to_dict(),
        "spec_y": spec_y.to_dict(),
        "strictly_decreasing": all(b < a for a, b in zip(means, means[1:])),
        "population_mean_errors": pop if same_law else None,
        "population_strictly_decreasing": all(b < a for a, b in zip(pop, pop[1:])) if same_law else None,
        "flags": flags,
    }
    return RateTable("w1_schedule", "n", n_grid, errors, metadata=meta)


def w1_eps_ratio_experiment(spec_x, spec_y, n, eps_grid, reps, seed=0, cost=None, tol=1e-9) -> RateTable:
    """Per replicate ``|S_eps - W| / (eps * log(1/eps))`` on an eps grid at fixed n."""
    cost = _w1_cost(spec_x, spec_y, cost)
    grid = sorted(float(e) for e in eps_grid)
    if any(e >= 1 for e in grid):
        raise ValueError("eps grid must lie in (0, 1) for the log(1/eps) normalization")
    errors = [[] for _ in grid]
    for r in range(reps):
        ss = replicate_seed(seed, "w1_eps_ratio", n, r)
        rx, ry = _child_seeds(ss, 2)
        X, Y = generate(spec_x, n, rx), generate(spec_y, n, ry)
        C = cost(X, Y)
        W = exact_ot_value(X, Y, cost)
        w = np.full(n, 1.0 / n)
        g = None
        for k in range(len(grid) - 1, -1, -1):
            eps = grid[k]
            sol = solve(w, w, C, eps, tol=tol, g0=g)
            g = sol.g
            S = float(sol.a @ sol.f + sol.b @ sol.g)
            errors[k].append(abs(S - W) / (eps * math.log(1 / eps)))
    means = [float(np.mean(e)) for e in errors]
    meta = {
        "n": int(n),
        "rescale_factor": cost.scale,
        "base_seed": int(seed),
        "ratio_spread": max(means) / min(means),
        "flags": [],
    }
    return RateTable("w1_eps_ratio", "eps", grid, errors, metadata=meta)


# ---------------------------------------------------------------------------
# RGG spectral gap
# ---------------------------------------------------------------------------


def rgg_gap_experiment(spec, n_grid, delta, d_nu, seed=0, n_alpha=50, c_rgg=1.0) -> RateTable:
    """lambda2 of the RGG at each n, with the variational inequality checked.

    For ``n_alpha`` random vectors per n, checks
    ``D(alpha) >= PAIR_FACTOR * lambda2 * var(alpha)``; violations are counted
    in the metadata (relative slack 1e-12 for rounding).
    """
    n_grid = [int(n) for n in n_grid]
    lams, comps, violations = [], [], []
    for n in n_grid:
        ss = replicate_seed(seed, "rgg_gap", n, 0)
        ry, ra = _child_seeds(ss, 2)
        Y = generate(spec, n, ry)
        graph = build_rgg(Y, delta, d_nu, c_rgg)
        gap = lambda2(graph)
        bad = 0
        for _ in range(n_alpha):
            alpha = ra.standard_normal(n)
            lhs = dirichlet_form(graph, alpha)
            rhs = PAIR_FACTOR * gap.lambda2 * uniform_variance(alpha)
            if lhs < rhs * (1 - 1e-12):
                bad += 1
        lams.append(gap.lambda2)
        comps.append(gap.n_components)
        violations.append(bad)
    meta = {
        "delta": delta,
        "d_nu": d_nu,
        "c_rgg": c_rgg,
        "n_components": comps,
        "variational_violations": violations,
        "max_min_ratio": (max(lams) / min(lams)) if min(lams) > 0 else float("inf"),
        "base_seed": int(seed),
        "flags": [],
    }
    return RateTable("rgg_lambda2", "n", n_grid, [[v] for v in lams], metadata=meta)
