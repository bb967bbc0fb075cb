"""
Solve one entropic OT problem and evaluate the extended potentials and map.

    python demos/quickstart.py
"""

import numpy as np

from midscale import ExtendedPotentials
from midscale.measures import CostSpec, GeneratorSpec, generate
from midscale.sinkhorn import dual_objective, solve

sx, sy = GeneratorSpec("uniform-ball", 3), GeneratorSpec("circle", 3)
X, Y = generate(sx, 300, 0), generate(sy, 300, 1)

# rescale the cost by the support radii so |c| <= 1
cost = CostSpec.for_supports("sqeuclidean", sx, sy)
w = np.full(300, 1 / 300)
sol = solve(w, w, cost(X, Y), eps=0.1)
print(f"iterations={sol.iterations}  residual={sol.residual:.1e}  value={sol.value:.6f}")
print(f"dual objective at the solution: {dual_objective(sol.f, sol.g, w, w, sol.C, sol.eps):.6f}")
print(f"b.g = {w @ sol.g:.1e} (normalization)")

pot = ExtendedPotentials(sol, X, Y, cost)
grid = np.array([[0.0, 0.0, 0.0], [0.3, 0.0, 0.0], [0.0, -0.6, 0.2]])
for x, fx, tx in zip(grid, pot.extend_f(grid), pot.entropic_map(grid)):
    print(f"x={x}  f(x)={fx:+.4f}  T(x)={np.round(tx, 3)}  |T(x)|={np.linalg.norm(tx):.3f}")
