"""
Debiased quarticity against the classical estimator
===================================================

For a constant variance ``c`` both estimators target ``c^2 t``. The classical
one, ``sum dX^4 / (3 mesh)``, has asymptotic variance ``32/3 c^4 t``; plugging
spot estimates into ``x^2`` and removing the second-order bias reaches ``8 c^4 t``.
"""

import numpy as np

from volfunctionals import ConstantVol, ModelSpec, TuningPlan
from volfunctionals.experiment import ExperimentSpec, run_mc

spec = ExperimentSpec(
    ModelSpec(ConstantVol(np.eye(1)), n=10_000),
    plan=TuningPlan(trunc_exponent=None),
    functions=("power:p=2",),
    estimators=("raw", "corrected_overlapping", "baseline_quarticity"),
    replications=400,
    seed=2,
)
summary = run_mc(spec)

# Errors are scaled by 1/sqrt(mesh), so the variances are directly comparable with 8 and 32/3.
for kind in spec.estimators:
    row = summary.row(kind, "power:p=2")
    print(f"{kind:24s} mean {row['normalized_mean']:+.3f}  variance {row['normalized_var']:.2f}")

# The raw plug-in is biased by roughly 2 c^2 / k per unit time, which is large
# after scaling; the correction removes it without inflating the variance.
ratio = (summary.row("corrected_overlapping", "power:p=2")["normalized_var"]
         / summary.row("baseline_quarticity", "power:p=2")["normalized_var"])
print(f"variance ratio {ratio:.3f} (asymptotic value 0.75)")
