"""
Point clouds, discrete measures, synthetic generators and cost matrices.

All generators place their support inside the closed unit ball. Manifold
generators (circle, sphere, torus) use an embedding radius of 1/2.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.stats import norm, qmc

EMBED_RADIUS = 0.5

KINDS = ("uniform-ball", "hyperplane", "circle", "sphere", "torus", "fattened", "finite-support")


# ---------------------------------------------------------------------------
# Measures
# ---------------------------------------------------------------------------


def as_points(points) -> np.ndarray:
    """Validate and return an ``(n, d)`` float array of finite coordinates."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
        raise ValueError(f"point cloud must be a non-empty (n, d) array, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("point cloud contains non-finite coordinates")
    return pts


@dataclass(frozen=True)
class DiscreteMeasure:
    """Weighted point cloud. Zero-weight atoms are dropped on construction."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = as_points(self.points)
        w = np.asarray(self.weights, dtype=float).ravel()
        if w.shape[0] != pts.shape[0]:
            raise ValueError("weights and points have different lengths")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        keep = w > 0
        if not np.any(keep):
            raise ValueError("all weights are zero")
        pts, w = pts[keep], w[keep]
        total = w.sum()
        if abs(total - 1.0) > 1e-12:
            w = w / total
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


def empirical_measure(points) -> DiscreteMeasure:
    pts = as_points(points)
    n = pts.shape[0]
    return DiscreteMeasure(pts, np.full(n, 1.0 / n))


def write_cloud_csv(points, path_or_buf=None) -> Optional[str]:
    """Write one row per point, no header. Returns the text if no target is given."""
    pts = as_points(points)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in pts:
        writer.writerow([repr(float(v)) for v in row])
    text = buf.getvalue()
    if path_or_buf is None:
        return text
    if hasattr(path_or_buf, "write"):
        path_or_buf.write(text)
    else:
        with open(path_or_buf, "w", newline="") as fh:
            fh.write(text)
    return None


def read_cloud_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise ValueError(f"{path}: empty point cloud")
    try:
        pts = np.array([[float(v) for v in row] for row in rows])
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    return as_points(pts)


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GeneratorSpec:
    """Law of a synthetic distribution.

    ``kind`` selects the family:

    * ``uniform-ball``: uniform on B(0, 1) in R^d
    * ``hyperplane``: uniform on the unit k-ball in the first k coordinates
    * ``circle``: uniform on the radius-1/2 circle in the first two coordinates
    * ``sphere``: uniform on S^k of radius 1/2 in the first k+1 coordinates
    * ``torus``: flat (Clifford) torus of norm 1/2 in the first four coordinates
    * ``fattened``: a ``base`` draw plus a uniform offset in B(0, delta_fat)
    * ``finite-support``: K atoms (fixed by ``param_seed`` unless ``atoms`` given)

    ``tilt`` is an optional Lipschitz weight on manifold kinds, bounded in
    ``tilt_bounds = (w_min, w_max)`` with ``w_min > 0``; draws are made by
    rejection against ``w_max``.
    """

    kind: str
    d: int
    k: Optional[int] = None
    K: Optional[int] = None
    delta_fat: Optional[float] = None
    base: Optional["GeneratorSpec"] = None
    atoms: Optional[tuple] = None
    atom_weights: Optional[tuple] = None
    param_seed: int = 0
    tilt: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)
    tilt_bounds: Optional[tuple] = None

    def __post_init__(self):
        self.validate()

    # -- validation ---------------------------------------------------------
    def validate(self):
        kind, d = self.kind, self.d
        if kind not in KINDS:
            raise ValueError(f"unknown generator kind {kind!r}; expected one of {KINDS}")
        if not isinstance(d, (int, np.integer)) or d < 1:
            raise ValueError(f"ambient dimension must be a positive integer, got {d!r}")
        if kind == "hyperplane":
            if self.k is None or not 1 <= self.k <= d:
                raise ValueError(f"hyperplane needs 1 <= k <= d, got k={self.k}, d={d}")
        elif kind == "circle":
            if d < 2:
                raise ValueError("circle needs ambient dimension d >= 2")
        elif kind == "sphere":
            if self.k is None or self.k < 1 or self.k + 1 > d:
                raise ValueError(f"sphere of dimension k needs 1 <= k <= d - 1, got k={self.k}, d={d}")
        elif kind == "torus":
            if d < 4:
                raise ValueError("the flat torus needs ambient dimension d >= 4")
        elif kind == "finite-support":
            if self.atoms is not None:
                atoms = np.asarray(self.atoms, dtype=float)
                if atoms.ndim != 2 or atoms.shape[1] != d:
                    raise ValueError("atoms must be a K x d array")
                if np.any(np.linalg.norm(atoms, axis=1) > 1 + 1e-12):
                    raise ValueError("atoms must lie in the closed unit ball")
                if self.K is not None and self.K != atoms.shape[0]:
                    raise ValueError("K disagrees with the number of atoms")
            elif self.K is None or self.K < 1:
                raise ValueError("finite-support needs K >= 1 or explicit atoms")
            if self.atom_weights is not None:
                w = np.asarray(self.atom_weights, dtype=float)
                if w.shape != (self.n_atoms,) or np.any(w <= 0):
                    raise ValueError("atom_weights must be K positive reals")
        elif kind == "fattened":
            if self.base is None:
                raise ValueError("fattened generator needs a base spec")
            if self.base.d != d:
                raise ValueError("base spec ambient dimension differs from d")
            if self.base.kind == "fattened":
                raise ValueError("nested fattening is not supported")
            if self.delta_fat is None or self.delta_fat < 0:
                raise ValueError("delta_fat must be nonnegative")
            if self.base.radius + self.delta_fat > 1 + 1e-12:
                raise ValueError(
                    f"base radius {self.base.radius} + delta_fat {self.delta_fat} leaves the unit ball"
                )
        if self.tilt is not None:
            if kind not in ("circle", "sphere", "torus", "hyperplane"):
                raise ValueError("density tilts are only supported on manifold kinds")
            if self.tilt_bounds is None:
                raise ValueError("a tilt needs tilt_bounds = (w_min, w_max)")
            lo, hi = self.tilt_bounds
            if not 0 < lo <= hi:
                raise ValueError("tilt bounds must satisfy 0 < w_min <= w_max")

    # -- metadata -----------------------------------------------------------
    @property
    def intrinsic_dim(self) -> int:
        kind = self.kind
        if kind == "uniform-ball":
            return self.d
        if kind in ("hyperplane", "sphere"):
            return self.k
        if kind == "circle":
            return 1
        if kind == "torus":
            return 2
        if kind == "finite-support":
            return 0
        # above the fattening scale the base dimension is what is seen
        return self.base.intrinsic_dim

    @property
    def radius(self) -> float:
        """Radius of a centered ball containing the support."""
        kind = self.kind
        if kind in ("uniform-ball", "hyperplane"):
            return 1.0
        if kind in ("circle", "sphere", "torus"):
            return EMBED_RADIUS
        if kind == "finite-support":
            return float(np.linalg.norm(self.atom_array(), axis=1).max())
        return self.base.radius + self.delta_fat

    @property
    def n_atoms(self) -> int:
        if self.atoms is not None:
            return len(self.atoms)
        return int(self.K)

    def atom_array(self) -> np.ndarray:
        if self.atoms is not None:
            return np.asarray(self.atoms, dtype=float)
        rng = np.random.default_rng([self.param_seed, self.K, self.d])
        return _uniform_ball(rng, self.K, self.d) * EMBED_RADIUS

    def atom_probabilities(self) -> np.ndarray:
        if self.atom_weights is None:
            return np.full(self.n_atoms, 1.0 / self.n_atoms)
        w = np.asarray(self.atom_weights, dtype=float)
        return w / w.sum()

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "d": int(self.d)}
        for key in ("k", "K", "delta_fat", "atom_weights", "tilt_bounds"):
            val = getattr(self, key)
            if val is not None:
                out[key] = list(val) if isinstance(val, tuple) else val
        if self.atoms is not None:
            out["atoms"] = [list(map(float, a)) for a in self.atoms]
        if self.base is not None:
            out["base"] = self.base.to_dict()
        if self.param_seed:
            out["param_seed"] = self.param_seed
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "GeneratorSpec":
        data = dict(data)
        unknown = set(data) - {
            "kind", "d", "k", "K", "delta_fat", "base", "atoms", "atom_weights", "param_seed", "tilt_bounds"
        }
        if unknown:
            raise ValueError(f"unknown generator keys: {sorted(unknown)}")
        if "base" in data:
            data["base"] = cls.from_dict(data["base"])
        if "atoms" in data:
            data["atoms"] = tuple(tuple(float(v) for v in a) for a in data["atoms"])
        for key in ("atom_weights", "tilt_bounds"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)


def _uniform_ball(rng, n, d):
    z = rng.standard_normal((n, d))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return z * rng.random(n)[:, None] ** (1.0 / d)


def _uniform_sphere(rng, n, k):
    z = rng.standard_normal((n, k + 1))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def _embed(block, d):
    out = np.zeros((block.shape[0], d))
    out[:, : block.shape[1]] = block
    return out


def _manifold_from_uniforms(spec: GeneratorSpec, u: np.ndarray) -> np.ndarray:
    """Map points of the unit cube onto the (untilted) law of ``spec``.

    Used both for iid draws (``u`` uniform) and quasi-Monte Carlo
    discretizations (``u`` a low-discrepancy sequence).
    """
    kind, d = spec.kind, spec.d
    if kind == "circle":
        t = 2 * np.pi * u[:, 0]
        return _embed(EMBED_RADIUS * np.column_stack([np.cos(t), np.sin(t)]), d)
    if kind == "torus":
        r = EMBED_RADIUS / np.sqrt(2.0)
        a, b = 2 * np.pi * u[:, 0], 2 * np.pi * u[:, 1]
        return _embed(r * np.column_stack([np.cos(a), np.sin(a), np.cos(b), np.sin(b)]), d)
    if kind == "sphere":
        z = norm.ppf(u[:, : spec.k + 1])
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        return _embed(EMBED_RADIUS * z, d)
    if kind in ("uniform-ball", "hyperplane"):
        k = d if kind == "uniform-ball" else spec.k
        z = norm.ppf(u[:, :k])
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        return _embed(z * u[:, k : k + 1] ** (1.0 / k), d)
    raise AssertionError(kind)


def _n_uniforms(spec: GeneratorSpec) -> int:
    kind = spec.kind
    if kind == "circle":
        return 1
    if kind == "torus":
        return 2
    if kind == "sphere":
        return spec.k + 1
    if kind == "uniform-ball":
        return spec.d + 1
    if kind == "hyperplane":
        return spec.k + 1
    raise AssertionError(kind)


def _draw_manifold(spec: GeneratorSpec, n: int, rng) -> np.ndarray:
    if spec.tilt is None:
        u = rng.random((n, _n_uniforms(spec)))
        # ppf(0) = -inf; the event has probability zero but guard it anyway
        np.clip(u, 1e-300, None, out=u)
        return _manifold_from_uniforms(spec, u)
    w_min, w_max = spec.tilt_bounds
    out = np.empty((0, spec.d))
    while out.shape[0] < n:
        batch = max(16, int(1.5 * (n - out.shape[0]) * w_max / w_min))
        u = np.clip(rng.random((batch, _n_uniforms(spec))), 1e-300, None)
        pts = _manifold_from_uniforms(spec, u)
        w = np.asarray(spec.tilt(pts), dtype=float)
        if np.any(w < w_min * (1 - 1e-12)) or np.any(w > w_max * (1 + 1e-12)):
            raise ValueError("tilt left its declared bounds")
        accept = rng.random(batch) * w_max < w
        out = np.vstack([out, pts[accept]])
    return out[:n]


def generate(spec: GeneratorSpec, n: int, seed) -> np.ndarray:
    """Draw ``n`` iid points from ``spec``; deterministic given ``(spec, n, seed)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    kind = spec.kind
    if kind == "finite-support":
        idx = rng.choice(spec.n_atoms, size=n, p=spec.atom_probabilities())
        return spec.atom_array()[idx]
    if kind == "fattened":
        base = generate(spec.base, n, rng)
        return base + spec.delta_fat * _uniform_ball(rng, n, spec.d)
    if kind == "uniform-ball" and spec.tilt is None:
        return _uniform_ball(rng, n, spec.d)
    return _draw_manifold(spec, n, rng)


def discretize(spec: GeneratorSpec, m: int, seed) -> DiscreteMeasure:
    """Dense ``m``-point discretization of the law of ``spec``.

    Finite supports are returned exactly (atoms with their probabilities).
    Other kinds use a scrambled Halton sequence pushed through the same
    transforms as :func:`generate`; tilts become importance weights.
    """
    kind = spec.kind
    if kind == "finite-support":
        return DiscreteMeasure(spec.atom_array(), spec.atom_probabilities())
    if kind == "fattened":
        base = spec.base
        kb = _n_uniforms(base) if base.kind != "finite-support" else 1
        u = _halton(kb + spec.d + 1, m, seed)
        if base.kind == "finite-support":
            cum = np.cumsum(base.atom_probabilities())
            idx = np.minimum(np.searchsorted(cum, u[:, 0], side="right"), base.n_atoms - 1)
            pts = base.atom_array()[idx]
            w = np.full(m, 1.0 / m)
        else:
            base_measure = _discretize_from_uniforms(base, u[:, :kb])
            pts, w = base_measure.points, base_measure.weights
        ball = _manifold_from_uniforms(GeneratorSpec("uniform-ball", spec.d), u[:, kb:])
        return DiscreteMeasure(pts + spec.delta_fat * ball, w)
    u = _halton(_n_uniforms(spec), m, seed)
    return _discretize_from_uniforms(spec, u)


def _discretize_from_uniforms(spec, u):
    pts = _manifold_from_uniforms(spec, u)
    if spec.tilt is None:
        return DiscreteMeasure(pts, np.full(pts.shape[0], 1.0 / pts.shape[0]))
    return DiscreteMeasure(pts, np.asarray(spec.tilt(pts), dtype=float))


def _halton(dim, m, seed):
    u = qmc.Halton(d=dim, scramble=True, seed=np.random.default_rng(seed)).random(m)
    return np.clip(u, 1e-12, 1 - 1e-12)


def distance_to_support(spec: GeneratorSpec, points) -> np.ndarray:
    """Euclidean distance from each point to the (analytically known) support."""
    pts = as_points(points)
    kind = spec.kind
    if kind == "uniform-ball":
        return np.maximum(np.linalg.norm(pts, axis=1) - 1.0, 0.0)
    if kind == "hyperplane":
        k = spec.k
        inner = np.maximum(np.linalg.norm(pts[:, :k], axis=1) - 1.0, 0.0)
        return np.hypot(inner, np.linalg.norm(pts[:, k:], axis=1))
    if kind in ("circle", "sphere"):
        k = 2 if kind == "circle" else spec.k + 1
        radial = np.linalg.norm(pts[:, :k], axis=1) - EMBED_RADIUS
        return np.hypot(radial, np.linalg.norm(pts[:, k:], axis=1))
    if kind == "torus":
        r = EMBED_RADIUS / np.sqrt(2.0)
        r1 = np.linalg.norm(pts[:, :2], axis=1) - r
        r2 = np.linalg.norm(pts[:, 2:4], axis=1) - r
        return np.sqrt(r1**2 + r2**2 + np.sum(pts[:, 4:] ** 2, axis=1))
    if kind == "finite-support":
        atoms = spec.atom_array()
        return np.sqrt(((pts[:, None, :] - atoms[None, :, :]) ** 2).sum(-1)).min(axis=1)
    # fattened: the closed delta_fat-neighbourhood of the base support
    return np.maximum(distance_to_support(spec.base, pts) - spec.delta_fat, 0.0)


# ---------------------------------------------------------------------------
# Costs
# ---------------------------------------------------------------------------

COST_FAMILIES = ("sqeuclidean", "euclidean", "custom")


@dataclass(frozen=True)
class CostSpec:
    """Cost family with its Lipschitz constant and rescale factor.

    ``lipschitz`` is the raw (unscaled) constant; when omitted it is derived
    from the clouds passed to :func:`cost_matrix` (``2 * max |x - y|`` for the
    squared Euclidean cost, ``1`` for the Euclidean cost). ``scale`` freezes the
    rescale factor; when omitted it is ``1 / max(1, max |c|)`` over the clouds.
    Custom costs supply ``func(X, Y) -> (n, m)``, ``lipschitz`` and optionally
    ``grad_y(X, y) -> (n, d)``.
    """

    family: str = "sqeuclidean"
    lipschitz: Optional[float] = None
    scale: Optional[float] = None
    func: Optional[Callable] = field(default=None, compare=False)
    grad_y: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if self.family not in COST_FAMILIES:
            raise ValueError(f"unknown cost family {self.family!r}")
        if self.family == "custom" and (self.func is None or self.lipschitz is None):
            raise ValueError("custom costs need func and lipschitz")
        if self.lipschitz is not None and self.lipschitz <= 0:
            raise ValueError("lipschitz constant must be positive")
        if self.scale is not None and self.scale <= 0:
            raise ValueError("rescale factor must be positive")

    @property
    def effective_lipschitz(self) -> float:
        if self.lipschitz is None or self.scale is None:
            raise ValueError("cost is not frozen; call freeze() first")
        return self.lipschitz * self.scale

    def raw(self, X, Y) -> np.ndarray:
        X, Y = as_points(X), as_points(Y)
        if X.shape[1] != Y.shape[1]:
            raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
        if self.family == "custom":
            return np.asarray(self.func(X, Y), dtype=float)
        sq = _sqdist(X, Y)
        if self.family == "sqeuclidean":
            return sq
        return np.sqrt(sq)

    def __call__(self, X, Y) -> np.ndarray:
        """Rescaled cost matrix; requires a frozen scale."""
        if self.scale is None:
            raise ValueError("cost is not frozen; call freeze() first")
        return self.scale * self.raw(X, Y)

    def grad_y_raw(self, X, y) -> np.ndarray:
        """Gradient in ``y`` of the raw cost ``c(x_i, y)`` for each row of ``X``."""
        X = as_points(X)
        y = np.asarray(y, dtype=float).ravel()
        if self.family == "sqeuclidean":
            return 2.0 * (y[None, :] - X)
        if self.family == "euclidean":
            diff = y[None, :] - X
            r = np.linalg.norm(diff, axis=1)
            if np.any(r == 0):
                raise SingularGradientError("euclidean cost is not differentiable where y coincides with a support point")
            return diff / r[:, None]
        if self.grad_y is None:
            raise ValueError("custom cost has no grad_y")
        return np.asarray(self.grad_y(X, y), dtype=float)

    def freeze(self, X, Y) -> "CostSpec":
        """Fix the rescale factor and raw Lipschitz constant from two clouds."""
        X, Y = as_points(X), as_points(Y)
        scale = self.scale
        if scale is None:
            raw = self.raw(X, Y)
            scale = 1.0 / max(1.0, float(np.abs(raw).max()))
        lip = self.lipschitz
        if lip is None:
            if self.family == "euclidean":
                lip = 1.0
            else:
                lip = 2.0 * float(np.sqrt(_sqdist(X, Y).max()))
                lip = lip if lip > 0 else 1.0
        return replace(self, scale=scale, lipschitz=lip)

    @classmethod
    def for_supports(cls, family: str, spec_x: GeneratorSpec, spec_y: GeneratorSpec) -> "CostSpec":
        """Frozen cost using population bounds from the generators' support radii."""
        D = spec_x.radius + spec_y.radius
        if family == "sqeuclidean":
            return cls(family, lipschitz=2 * D, scale=1.0 / max(1.0, D**2))
        if family == "euclidean":
            return cls(family, lipschitz=1.0, scale=1.0 / max(1.0, D))
        raise ValueError("support bounds are only known for the euclidean families")

    def to_dict(self) -> dict:
        out = {"family": self.family}
        if self.lipschitz is not None:
            out["lipschitz"] = self.lipschitz
        if self.scale is not None:
            out["scale"] = self.scale
        return out


class SingularGradientError(ValueError):
    pass


class CostMatrix(NamedTuple):
    matrix: np.ndarray
    lipschitz: float
    scale: float


def _sqdist(X, Y, block=256):
    # direct differences, not the |x|^2 + |y|^2 - 2<x, y> expansion: the
    # Lipschitz certificates need full relative accuracy for nearby points
    out = np.empty((X.shape[0], Y.shape[0]))
    for start in range(0, X.shape[0], block):
        diff = X[start : start + block, None, :] - Y[None, :, :]
        np.einsum("ijk,ijk->ij", diff, diff, out=out[start : start + block])
    return out


def cost_matrix(X, Y, spec: CostSpec = CostSpec()) -> CostMatrix:
    """Rescaled cost matrix with ``max |C| <= 1`` and its effective Lipschitz constant."""
    X, Y = as_points(X), as_points(Y)
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    frozen = spec.freeze(X, Y)
    C = frozen.scale * frozen.raw(X, Y)
    return CostMatrix(C, frozen.effective_lipschitz, frozen.scale)
