"""Estimation of integrated functionals of volatility from high-frequency data."""

from .errors import ConfigError, DataError, DimensionError, DomainError, NumericalError, VolFuncError
from .estimators import (
    EstimateReport,
    ThetaBiasReport,
    baseline_moment,
    baseline_quarticity,
    border_correct,
    confidence_interval,
    estimate,
    estimate_avar,
    estimate_avar_corrected,
    estimate_corrected_nonoverlapping,
    estimate_corrected_overlapping,
    estimate_raw,
    theta_mode_bias,
)
from .simkit import CIRVol, ConstantVol, HestonType, Jumps, ModelSpec, rng_stream, simulate
from .spotvol import (
    ObservationGrid,
    SpotSeries,
    TuningPlan,
    read_grid_csv,
    select_truncation,
    select_window,
    spot_estimates,
)
from .testfn import (
    TestFunction,
    avar_function,
    check_derivatives,
    entry_product,
    gaussian_abs_moment,
    identity_component,
    parse_function,
    power,
    trace_power,
)

__version__ = "0.1.0"
