"""
Exact-inequality battery run by ``midscale selftest``.

Each check returns a :class:`CheckResult`; ``passed`` is True only when the
inequality held on every trial. Problems are small and seeded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List

import numpy as np

from .covering import density_l2_norm, greedy_net, inverse_mass_integral
from .extension import ExtendedPotentials
from .measures import CostSpec, GeneratorSpec, empirical_measure, generate
from .sinkhorn import DualSolution, dual_gradient, dual_objective, round_f, solve


@dataclass
class CheckResult:
    name: str
    passed: bool
    trials: int
    worst: float  # largest violation margin seen (<= 0 means satisfied)
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<22} trials={self.trials:<6} worst={self.worst:+.3e}  {self.detail}"


@dataclass
class Instance:
    X: np.ndarray
    Y: np.ndarray
    cost: CostSpec
    solution: DualSolution

    @property
    def potentials(self) -> ExtendedPotentials:
        return ExtendedPotentials(self.solution, self.X, self.Y, self.cost)

    @property
    def lipschitz(self) -> float:
        return self.cost.effective_lipschitz


SPEC_X = GeneratorSpec("uniform-ball", 3)
SPEC_Y = GeneratorSpec("circle", 3)


def battery_instances(seed=0, n=60, eps_grid=(0.05, 0.1, 0.5), tol=1e-9, per_eps=2) -> List[Instance]:
    """Seeded instances: uniform ball vs circle in R^3, squared Euclidean cost."""
    cost = CostSpec.for_supports("sqeuclidean", SPEC_X, SPEC_Y)
    out = []
    rng = np.random.default_rng(seed)
    for eps in eps_grid:
        for _ in range(per_eps):
            X = generate(SPEC_X, n, rng)
            Y = generate(SPEC_Y, n, rng)
            w = np.full(n, 1.0 / n)
            sol = solve(w, w, cost(X, Y), eps, tol=tol)
            out.append(Instance(X, Y, cost, sol))
    return out


def perturbed(inst: Instance, amount: float) -> Instance:
    """Copy of ``inst`` with ``amount`` added to both potentials (negative control)."""
    s = inst.solution
    sol = DualSolution(s.f + amount, s.g + amount, s.eps, s.C, s.a, s.b, s.residual, s.iterations, s.tol)
    return Instance(inst.X, inst.Y, inst.cost, sol)


# ---------------------------------------------------------------------------
# Checks on solved instances
# ---------------------------------------------------------------------------


def check_feasibility(instances, tol) -> CheckResult:
    worst = -np.inf
    for inst in instances:
        s = inst.solution
        gf, gg = dual_gradient(s.f, s.g, s.a, s.b, s.C, s.eps)
        worst = max(worst, max(np.abs(gf).max(), np.abs(gg).max()) - 10 * tol)
    return CheckResult("feasibility", worst <= 0, len(instances), worst, "marginal residual <= 10 tol")


def check_normalization(instances) -> CheckResult:
    worst = max(abs(float(i.solution.b @ i.solution.g)) - 1e-10 for i in instances)
    return CheckResult("normalization", worst <= 0, len(instances), worst, "|b.g| <= 1e-10")


def check_duality(instances, tol) -> CheckResult:
    worst = -np.inf
    for inst in instances:
        s = inst.solution
        gap = abs(float(s.a @ s.f + s.b @ s.g) - dual_objective(s.f, s.g, s.a, s.b, s.C, s.eps))
        worst = max(worst, gap - 10 * tol)
    return CheckResult("duality", worst <= 0, len(instances), worst, "|a.f + b.g - Phi| <= 10 tol")


def check_pointwise(instances) -> CheckResult:
    worst = max(
        max(np.abs(i.solution.f).max(), np.abs(i.solution.g).max()) - (2 + 1e-6) for i in instances
    )
    return CheckResult("pointwise", worst <= 0, len(instances), worst, "|f|, |g| <= 2 + 1e-6")


def check_concavity(instances, trials=100, seed=0, slack=1e-10, relative=True) -> CheckResult:
    """Two-sided first-order concavity bounds for random pairs of potentials.

    With ``relative`` the slack is multiplied by ``max(1, |Phi|)`` to absorb
    rounding in the objective values; otherwise it is absolute.
    """
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for t in range(trials):
        inst = instances[t % len(instances)]
        s = inst.solution
        eps = s.eps

        def draw():
            return (s.f + eps * rng.uniform(-2, 2) * rng.standard_normal(s.f.size),
                    s.g + eps * rng.uniform(-2, 2) * rng.standard_normal(s.g.size))

        (f0, g0), (f1, g1) = draw(), draw()
        phi0 = dual_objective(f0, g0, s.a, s.b, s.C, eps)
        phi1 = dual_objective(f1, g1, s.a, s.b, s.C, eps)
        gf1, gg1 = dual_gradient(f1, g1, s.a, s.b, s.C, eps)
        gf0, gg0 = dual_gradient(f0, g0, s.a, s.b, s.C, eps)
        df, dg = f0 - f1, g0 - g1
        upper = s.a @ (gf1 * df) + s.b @ (gg1 * dg)
        lower = s.a @ (gf0 * df) + s.b @ (gg0 * dg)
        tol = slack * max(1.0, abs(phi0), abs(phi1)) if relative else slack
        worst = max(worst, (phi0 - phi1) - upper - tol, lower - (phi0 - phi1) - tol)
    return CheckResult("concavity", worst <= 0, trials, worst, "first-order bounds, both sides")


def check_rounding(instances, trials=100, seed=0, slack=1e-12) -> CheckResult:
    """``Phi(round_f(g), g) >= Phi(f, g)`` for random ``f``, ``g``."""
    rng = np.random.default_rng(seed + 1)
    worst = -np.inf
    for t in range(trials):
        s = instances[t % len(instances)].solution
        f = s.eps * rng.standard_normal(s.f.size) * rng.uniform(0, 3)
        g = s.g + s.eps * rng.standard_normal(s.g.size) * rng.uniform(0, 3)
        gain = dual_objective(round_f(g, s.C, s.b, s.eps), g, s.a, s.b, s.C, s.eps) - dual_objective(
            f, g, s.a, s.b, s.C, s.eps
        )
        worst = max(worst, -gain - slack)
    return CheckResult("rounding", worst <= 0, trials, worst, "rounding never lowers the dual")


def _pairs(inst, rng, k):
    """``k`` pairs of points in the supports: half sample pairs, half fresh nearby pairs."""
    def block(cloud, spec):
        h = k // 2
        i, j = rng.integers(cloud.shape[0], size=(2, h))
        fresh = generate(spec, k - h, rng)
        near = fresh + rng.uniform(0, 0.05) * rng.standard_normal(fresh.shape)
        # nudge back onto the support so the population Lipschitz bound applies
        if spec.kind == "circle":
            near[:, 2:] = 0
            rad = np.linalg.norm(near[:, :2], axis=1, keepdims=True)
            near[:, :2] *= 0.5 / rad
        else:
            rad = np.maximum(np.linalg.norm(near, axis=1, keepdims=True), 1.0)
            near /= rad
        return np.vstack([cloud[i], fresh]), np.vstack([cloud[j], near])
    return block(inst.X, SPEC_X), block(inst.Y, SPEC_Y)


def check_lipschitz(instances, pairs=10_000, seed=0, factor=1 + 1e-8) -> List[CheckResult]:
    """Lipschitz bounds for the extended potentials and log-Lipschitz for the density."""
    rng = np.random.default_rng(seed + 2)
    per = max(1, pairs // len(instances))
    w_f = w_g = w_p = -np.inf
    for inst in instances:
        pot, L, eps = inst.potentials, inst.lipschitz, inst.solution.eps
        (x0, x1), (y0, y1) = _pairs(inst, rng, per)
        dx = np.linalg.norm(x0 - x1, axis=1)
        dy = np.linalg.norm(y0 - y1, axis=1)
        w_f = max(w_f, np.max(np.abs(pot.extend_f(x0) - pot.extend_f(x1)) - L * dx * factor))
        w_g = max(w_g, np.max(np.abs(pot.extend_g(y0) - pot.extend_g(y1)) - L * dy * factor))
        xs = x0[: y0.shape[0]]
        logp0 = np.log([pot.density(x, y) for x, y in zip(xs[:200], y0[:200])])
        logp1 = np.log([pot.density(x, y) for x, y in zip(xs[:200], y1[:200])])
        w_p = max(w_p, np.max(np.abs(logp0 - logp1) - 2 * L / eps * dy[:200] * factor))
    n = per * len(instances)
    return [
        CheckResult("lipschitz_f", w_f <= 0, n, w_f, "extended f is L-Lipschitz"),
        CheckResult("lipschitz_g", w_g <= 0, n, w_g, "extended g is L-Lipschitz"),
        CheckResult("log_lipschitz_p", w_p <= 0, min(200, per) * len(instances), w_p, "log p is 2L/eps-Lipschitz in y"),
    ]


def check_density_covering(instances) -> CheckResult:
    """``|p|^2 <= e^8 * min(inverse-mass integrals at radius 4 eps / L)``."""
    worst = -np.inf
    for inst in instances:
        s, L = inst.solution, inst.lipschitz
        r = 4 * s.eps / L
        bound = math.exp(8) * min(
            inverse_mass_integral(empirical_measure(inst.X), r), inverse_mass_integral(empirical_measure(inst.Y), r)
        )
        worst = max(worst, density_l2_norm(s) - bound)
    return CheckResult("density_covering", worst <= 0, len(instances), worst, "e^8 covering chain")


def check_inverse_mass(trials=200, seed=0) -> CheckResult:
    """``inverse_mass_integral(P, delta) <= greedy_net(P, delta / 4).count``."""
    rng = np.random.default_rng(seed + 3)
    specs = [GeneratorSpec("uniform-ball", 2), GeneratorSpec("circle", 3), GeneratorSpec("sphere", 4, k=2),
             GeneratorSpec("finite-support", 3, K=7)]
    worst = -np.inf
    for t in range(trials):
        spec = specs[t % len(specs)]
        P = empirical_measure(generate(spec, int(rng.integers(5, 150)), rng))
        delta = float(np.exp(rng.uniform(np.log(0.02), np.log(2.0))))
        worst = max(worst, inverse_mass_integral(P, delta) - greedy_net(P.points, delta / 4).count)
    return CheckResult("inverse_mass", worst <= 0, trials, worst, "inverse mass <= greedy count at delta/4")


def check_dual_gradient_fd(trials=100, seed=0, h=1e-5, rtol=1e-5) -> CheckResult:
    """Dual gradient against central finite differences of the dual objective."""
    rng = np.random.default_rng(seed + 4)
    worst = -np.inf
    for _ in range(trials):
        n, m = rng.integers(2, 8, size=2)
        a = rng.dirichlet(np.ones(n))
        b = rng.dirichlet(np.ones(m))
        C = rng.random((n, m))
        eps = float(rng.uniform(0.1, 1.0))
        f, g = 0.3 * rng.standard_normal(n), 0.3 * rng.standard_normal(m)
        gf, gg = dual_gradient(f, g, a, b, C, eps)
        analytic = np.concatenate([a * gf, b * gg])
        fd = np.empty(n + m)
        for k in range(n + m):
            e = np.zeros(n + m)
            e[k] = h
            plus = dual_objective(f + e[:n], g + e[n:], a, b, C, eps)
            minus = dual_objective(f - e[:n], g - e[n:], a, b, C, eps)
            fd[k] = (plus - minus) / (2 * h)
        rel = np.linalg.norm(fd - analytic) / np.linalg.norm(analytic)
        worst = max(worst, rel - rtol)
    return CheckResult("dual_gradient_fd", worst <= 0, trials, worst, "relative error <= 1e-5")


def check_map_gradient_fd(instances, points=100, seed=0, h=1e-5, rtol=1e-5) -> CheckResult:
    """Gradient of the extended ``g`` against central finite differences."""
    rng = np.random.default_rng(seed + 5)
    worst = -np.inf
    per = max(1, points // len(instances))
    for inst in instances:
        pot = inst.potentials
        d = inst.Y.shape[1]
        ys = rng.uniform(-1, 1, size=(per, d))
        grads = pot.map_gradient_g(ys)
        for y, grad in zip(ys, grads):
            E = h * np.eye(d)
            fd = (pot.extend_g(y[None, :] + E) - pot.extend_g(y[None, :] - E)) / (2 * h)
            worst = max(worst, np.linalg.norm(fd - grad) / np.linalg.norm(grad) - rtol)
    return CheckResult("map_gradient_fd", worst <= 0, per * len(instances), worst, "relative error <= 1e-5")


def run_battery(seed=0, tol=1e-9, perturb=0.0, lipschitz_pairs=10_000, trials=100) -> List[CheckResult]:
    instances = battery_instances(seed, tol=tol)
    if perturb:
        instances = [perturbed(i, perturb) for i in instances]
    results = [
        check_feasibility(instances, tol),
        check_normalization(instances),
        check_duality(instances, tol),
        check_pointwise(instances),
        check_concavity(instances, trials, seed),
        check_rounding(instances, trials, seed),
        *check_lipschitz(instances, lipschitz_pairs, seed),
        check_density_covering(instances),
        check_inverse_mass(2 * trials, seed),
        check_dual_gradient_fd(trials, seed),
        check_map_gradient_fd(instances, trials, seed),
    ]
    return results
