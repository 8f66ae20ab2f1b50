"""Monte Carlo checks of individual estimator properties."""

import numpy as np
import pytest

from volfunctionals import testfn
from volfunctionals.estimators import estimate_avar
from volfunctionals.experiment import ExperimentSpec, run_mc
from volfunctionals.simkit import ConstantVol, HestonType, ModelSpec, simulate
from volfunctionals.spotvol import TuningPlan, select_window, spot_estimates

pytestmark = pytest.mark.slow

NO_TRUNC = TuningPlan(trunc_exponent=None)


def test_border_correction_removes_the_edge_bias():
    spec = ExperimentSpec(ModelSpec(ConstantVol(np.eye(1)), n=10_000), plan=NO_TRUNC,
                          functions=("power:p=1", "power:p=2"),
                          estimators=("raw", "raw_border_corrected"), replications=500, seed=21)
    s = run_mc(spec)
    # for a linear g the edge term is the only bias
    raw = s.row("raw", "power:p=1")["mean_error"]
    bordered = s.row("raw_border_corrected", "power:p=1")["mean_error"]
    assert abs(bordered) < abs(raw)
    # for the quarticity the edge term, about (k-1) mesh c^2, is removed while the
    # positive statistical-error bias 2 c^2 / k remains
    k, mesh = 80, 1e-4
    shift = s.row("raw_border_corrected", "power:p=2")["mean_error"] - s.row("raw", "power:p=2")["mean_error"]
    assert shift == pytest.approx((k - 1) * mesh, rel=0.05)
    assert s.row("raw_border_corrected", "power:p=2")["mean_error"] == pytest.approx(2 / k, rel=0.5)


def test_overlapping_and_block_versions_share_the_limit():
    spec = ExperimentSpec(ModelSpec(ConstantVol(np.eye(1)), n=10_000), plan=NO_TRUNC,
                          functions=("power:p=2",),
                          estimators=("corrected_overlapping", "corrected_nonoverlapping"),
                          replications=1000, seed=22)
    s = run_mc(spec)
    sd_o = s.errors("corrected_overlapping", "power:p=2").std(ddof=1)
    sd_b = s.errors("corrected_nonoverlapping", "power:p=2").std(ddof=1)
    assert abs(sd_o / sd_b - 1) < 0.10
    # the two estimates differ by much less than either one's error
    gap = (s.column("value", "corrected_overlapping", "power:p=2")
           - s.column("value", "corrected_nonoverlapping", "power:p=2")) / np.sqrt(1e-4)
    assert gap.std() < sd_o


def test_variance_plugin_concentrates():
    # power(1) at c = 2: hbar(c) = 2 c^2, so the plug-in targets 8 over t = 1
    values = []
    for n in (1000, 100_000):
        path = simulate(ModelSpec(ConstantVol(np.array([[2.0]])), n=n), seed=23)
        k = select_window(n, 1 / n, TuningPlan())
        values.append(estimate_avar(testfn.power(1), spot_estimates(path.grid, k)))
    assert abs(values[1] - 8.0) < abs(values[0] - 8.0) or abs(values[1] - 8.0) < 0.1
    assert abs(values[1] - 8.0) < 0.3


def test_heston_type_coverage():
    spec = ExperimentSpec(ModelSpec(HestonType(), n=10_000), functions=("power:p=2",),
                          replications=300, seed=24)
    cov = run_mc(spec).row("corrected_overlapping", "power:p=2")["coverage"]
    assert 0.90 <= cov <= 0.99
