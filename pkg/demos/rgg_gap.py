"""
Spectral gap of the random geometric graph on circle samples as n grows.

With the weight c / (n delta^(d+2)) the gap stays of the same order as n
grows 16-fold, and the Dirichlet form dominates the variance for every vector.

    python demos/rgg_gap.py
"""

import numpy as np

from midscale.measures import GeneratorSpec, generate
from midscale.rgg import PAIR_FACTOR, build_rgg, dirichlet_form, lambda2, uniform_variance

spec = GeneratorSpec("circle", 2)
rng = np.random.default_rng(0)
for n in (100, 200, 400, 800, 1600):
    g = build_rgg(generate(spec, n, rng), delta=0.3, d_nu=1)
    gap = lambda2(g)
    alpha = rng.standard_normal(n)
    ratio = dirichlet_form(g, alpha) / (PAIR_FACTOR * uniform_variance(alpha))
    print(f"n={n:5d}  edges={g.n_edges:7d}  lambda2={gap.lambda2:.4f}  "
          f"D(alpha) / (2 var alpha) = {ratio:.3f} >= lambda2")
