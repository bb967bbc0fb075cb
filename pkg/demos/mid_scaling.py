"""
Density scale against eps for a ball source and targets of growing intrinsic
dimension, all embedded in R^6.

The fitted slope of log |p|^2 against log(L / eps) grows with the
intrinsic dimension of the target and stays far below what the ambient 6
would give. With a smooth cost the observed slope is close to half the
intrinsic dimension. Smaller than the acceptance run (n = 1500), so it
finishes in well under a minute.

    python demos/mid_scaling.py
"""

from midscale.experiments import eps_scan_experiment, geometric_grid
from midscale.measures import CostSpec, GeneratorSpec

src = GeneratorSpec("uniform-ball", 6)
grid = geometric_grid(0.03, 0.2)
for target in (GeneratorSpec("circle", 6), GeneratorSpec("sphere", 6, k=2), GeneratorSpec("torus", 6)):
    cost = CostSpec.for_supports("sqeuclidean", src, target)
    out = eps_scan_experiment(src, target, 1500, grid, seed=0, cost=cost)
    l2, sup = out["density_l2"], out["density_sup"]
    print(f"{target.kind:<7} intrinsic dim {target.intrinsic_dim}: "
          f"L2 slope {l2.slope:.2f}, sup slope {sup.slope:.2f}, "
          f"covering chain holds: {all(l2.metadata['covering_chain_holds'])}")
