"""
Local spot covariance from a window of increments
=================================================

A spot estimate averages the outer products of ``k`` consecutive increments.
Short windows are noisy, long windows blur a moving volatility.
"""

import numpy as np

from volfunctionals import CIRVol, ModelSpec, TuningPlan, select_window, simulate, spot_estimates

# A one-dimensional path whose variance follows a mean-reverting square-root process.
spec = ModelSpec(CIRVol(kappa=5.0, vbar=1.0, xi=0.8, v0=0.5), n=20_000)
path = simulate(spec, seed=1)

# The true spot variance is recorded on the fine Euler grid; keep one value per observation.
true_c = path.true_spot[:: spec.euler_substeps, 0, 0]

for k in (10, 50, select_window(spec.n, spec.mesh, TuningPlan()), 1000):
    spots = spot_estimates(path.grid, k)
    est = spots.estimates[:, 0, 0]
    # window i covers increments i .. i+k-1; compare with the truth at its midpoint
    mid = true_c[np.arange(len(est)) + k // 2]
    print(f"k={k:5d}  mean abs error {np.mean(np.abs(est - mid)):.4f}")

# The default window k = ceil(2 n^0.4) sits between the two failure modes.
