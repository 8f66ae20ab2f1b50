"""
Window of order 1/sqrt(mesh)
============================

With ``k = ceil(theta / sqrt(mesh))`` the raw plug-in keeps a bias of the same
order as its standard deviation: an edge term ``a1 = -theta/2 (g(c_0) + g(c_t))``
and a statistical-error term ``a2``. Both have plug-in estimates.
"""

import numpy as np

from volfunctionals import ConstantVol, ModelSpec, TuningPlan
from volfunctionals.experiment import ExperimentSpec, run_mc

for theta in (0.5, 1.0, 2.0):
    spec = ExperimentSpec(ModelSpec(ConstantVol(np.eye(1)), n=10_000),
                          plan=TuningPlan(theta=theta, trunc_exponent=None),
                          functions=("power:p=2",), estimators=("raw", "raw_border_corrected"),
                          replications=200, seed=6)
    s = run_mc(spec)
    raw = s.row("raw", "power:p=2")
    bordered = s.row("raw_border_corrected", "power:p=2")
    # for c = 1 the limits are a1 = -theta and a2 = 2 / theta
    print(f"theta={theta}: raw mean {raw['normalized_mean']:+.2f} (a1+a2 plug-in "
          f"{raw['mean_a1'] + raw['mean_a2']:+.2f}), edge-corrected mean "
          f"{bordered['normalized_mean']:+.2f} (a2 plug-in {bordered['mean_a2']:+.2f})")
