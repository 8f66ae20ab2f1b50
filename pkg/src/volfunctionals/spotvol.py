"""Observation grids and the local truncated spot-covariance estimator.

For a window of ``k`` increments starting at increment ``i`` the estimate is

    c_hat[i] = 1/(k * mesh) * sum_{j<k} dX[i+j] dX[i+j]^T 1{|dX[i+j]| <= u}

with one global threshold ``u`` on the Euclidean norm of the increment.
"""

import csv
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import ConfigError, DataError, DimensionError

SPACING_RTOL = 1e-6


@dataclass(frozen=True)
class ObservationGrid:
    """Regularly sampled ``d``-dimensional path: ``values`` has ``n + 1`` rows."""

    values: np.ndarray
    mesh: float
    origin_time: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] < 2:
            raise DataError("a grid needs at least two observations (n >= 1)")
        if not np.all(np.isfinite(v)):
            raise DataError("observations must be finite")
        if not (self.mesh > 0 and math.isfinite(self.mesh)):
            raise DataError("mesh must be positive")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_increments(cls, increments, mesh, start=None):
        inc = np.asarray(increments, dtype=float)
        if inc.ndim == 1:
            inc = inc[:, None]
        x0 = np.zeros((1, inc.shape[1])) if start is None else np.atleast_2d(start)
        return cls(np.vstack([x0, x0 + np.cumsum(inc, axis=0)]), mesh)

    @property
    def dim(self):
        return self.values.shape[1]

    @property
    def n(self):
        return self.values.shape[0] - 1

    @property
    def horizon(self):
        return self.n * self.mesh

    @property
    def times(self):
        return self.origin_time + self.mesh * np.arange(self.n + 1)

    def increments(self):
        return np.diff(self.values, axis=0)


@dataclass(frozen=True)
class TuningPlan:
    """Window and truncation tuning.

    ``k_n = ceil(window_const * n**window_exponent)`` unless ``theta`` is set,
    in which case ``k_n = ceil(theta / sqrt(mesh))``. The truncation level is
    ``trunc_const * scale * mesh**trunc_exponent``; ``trunc_exponent=None``
    disables truncation. ``trunc_scale`` is ``"bipower"`` or ``"fixed:<value>"``.
    """

    window_exponent: float = 0.4
    window_const: float = 2.0
    trunc_exponent: Optional[float] = 0.49
    trunc_const: float = 4.0
    trunc_scale: str = "bipower"
    theta: Optional[float] = None

    def __post_init__(self):
        if self.theta is None and not (1 / 3 < self.window_exponent < 1 / 2):
            raise ConfigError("window exponent must lie in (1/3, 1/2)")
        if self.theta is not None and self.theta <= 0:
            raise ConfigError("theta must be positive")
        if self.window_const <= 0:
            raise ConfigError("window constant must be positive")
        if self.trunc_exponent is not None and not (0 < self.trunc_exponent < 0.5):
            raise ConfigError("truncation exponent must lie in (0, 1/2)")
        if self.trunc_const <= 0:
            raise ConfigError("truncation constant must be positive")
        self.fixed_scale  # validates the scale string

    @property
    def fixed_scale(self):
        if self.trunc_scale == "bipower":
            return None
        kind, _, val = self.trunc_scale.partition(":")
        if kind != "fixed":
            raise ConfigError(f"unknown truncation scale {self.trunc_scale!r}")
        try:
            scale = float(val)
        except ValueError:
            raise ConfigError(f"bad fixed truncation scale {val!r}") from None
        if scale <= 0:
            raise ConfigError("fixed truncation scale must be positive")
        return scale


def truncation_exponent_lower_bound(p, r):
    """Smallest admissible truncation exponent ``(2p - 1) / (2 (2p - r))``."""
    return (2 * p - 1) / (2 * (2 * p - r))


def _ceil(x):
    # 10000 ** 0.4 evaluates to 39.99999999999999 or 40.00000000000001
    # depending on the platform; snap near-integers first.
    r = round(x)
    return int(r) if abs(x - r) < 1e-9 * max(1.0, abs(x)) else math.ceil(x)


def unclamped_window(n, mesh, plan):
    if plan.theta is not None:
        return _ceil(plan.theta / math.sqrt(mesh))
    return _ceil(plan.window_const * n**plan.window_exponent)


def select_window(n, mesh, plan):
    """Window length ``k_n``, clamped to ``[2, n - 1]``."""
    if n < 3:
        raise DataError(f"n={n} is too small to fit any window (need n >= 3)")
    return min(max(unclamped_window(n, mesh, plan), 2), n - 1)


def bipower_scale(grid):
    """Jump-robust volatility scale ``sqrt(trace(BV) / t)``.

    ``BV[l, l] = (pi/2) * n/(n-1) * sum_i |dX_i^l| |dX_{i+1}^l|`` estimates the
    integrated variance of component ``l`` over the horizon ``t``.
    """
    inc = np.abs(grid.increments())
    n = inc.shape[0]
    if n < 2:
        return 0.0
    bv = (math.pi / 2) * (n / (n - 1)) * np.sum(inc[1:] * inc[:-1], axis=0)
    return math.sqrt(float(np.sum(bv)) / grid.horizon)


class Truncation(NamedTuple):
    level: float
    scale: float
    degenerate: bool = False


def select_truncation(grid, plan):
    """Truncation level ``u_n`` for one path (``inf`` when disabled)."""
    if plan.trunc_exponent is None:
        return Truncation(math.inf, math.nan)
    scale = plan.fixed_scale
    if scale is None:
        scale = bipower_scale(grid)
    if scale <= 0:
        warnings.warn("degenerate path (zero bipower scale); truncation disabled")
        return Truncation(math.inf, scale, degenerate=True)
    return Truncation(plan.trunc_const * scale * grid.mesh**plan.trunc_exponent, scale)


@dataclass(frozen=True)
class SpotSeries:
    """Spot estimates ``estimates[i]`` for windows ``i = 0 .. n - k`` (0-based)."""

    mesh: float
    window: int
    truncation: float
    estimates: np.ndarray
    truncated_fraction: float
    n: int

    @property
    def dim(self):
        return self.estimates.shape[-1]

    def __len__(self):
        return self.estimates.shape[0]


def _window_sums(terms, k):
    """Sums of ``k`` consecutive entries of ``terms`` along axis 0.

    Prefix sums restart at every multiple of ``k``: the window starting at
    ``b*k + r`` is the tail of block ``b`` plus the head of block ``b + 1``.
    Rounding drift is therefore bounded by ``k`` additions.
    """
    n = terms.shape[0]
    nb = -(-n // k) + 1
    padded = np.zeros((nb * k,) + terms.shape[1:])
    padded[:n] = terms
    blocks = padded.reshape((nb, k) + terms.shape[1:])
    head = np.cumsum(blocks, axis=1)
    tail = np.cumsum(blocks[:, ::-1], axis=1)[:, ::-1]
    out = tail[:-1].copy()
    out[:, 1:] += head[1:, :-1]
    return out.reshape((-1,) + terms.shape[1:])[: n - k + 1]


def spot_estimates(grid, k, u=math.inf):
    """Truncated local spot covariances for every full window of ``k`` increments."""
    n = grid.n
    if k < 1:
        raise ConfigError("window must be at least 1")
    if k > n:
        raise DataError(f"window k={k} exceeds the number of increments n={n}")
    inc = grid.increments()
    keep = np.ones(n, dtype=bool) if math.isinf(u) else np.linalg.norm(inc, axis=1) <= u
    kept = np.where(keep[:, None], inc, 0.0)
    terms = kept[:, :, None] * kept[:, None, :]
    est = _window_sums(terms, k) / (k * grid.mesh)
    return SpotSeries(
        mesh=grid.mesh,
        window=int(k),
        truncation=float(u),
        estimates=est,
        truncated_fraction=float(1.0 - keep.mean()),
        n=n,
    )


def spot_estimates_direct(grid, k, u=math.inf):
    """Per-window summation without any reuse; reference for ``spot_estimates``."""
    inc = grid.increments()
    keep = np.linalg.norm(inc, axis=1) <= u
    out = np.empty((grid.n - k + 1, grid.dim, grid.dim))
    for i in range(grid.n - k + 1):
        w = inc[i : i + k][keep[i : i + k]]
        out[i] = w.T @ w / (k * grid.mesh)
    return out


# ---------------------------------------------------------------------------
# CSV ingestion


def read_grid_csv(path):
    """Read ``time,X1..Xd`` rows (header optional) into an ObservationGrid.

    The time column must be regularly spaced to within a relative 1e-6 of
    the mesh; irregular data has to be resampled beforehand.
    """
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                if lineno == 1 and not rows:
                    continue  # header
                raise DataError(f"{path}:{lineno}: non-numeric value") from None
    if len(rows) < 2:
        raise DataError(f"{path}: need at least two observation rows")
    width = {len(r) for r in rows}
    if len(width) != 1 or width.pop() < 2:
        raise DimensionError(f"{path}: rows must all have a time column and >= 1 value column")
    arr = np.array(rows)
    times, values = arr[:, 0], arr[:, 1:]
    steps = np.diff(times)
    n = len(steps)
    mesh = (times[-1] - times[0]) / n
    if mesh <= 0 or np.any(np.abs(steps - mesh) > SPACING_RTOL * mesh):
        worst = int(np.argmax(np.abs(steps - mesh))) + 2
        raise DataError(
            f"{path}: observation times are not regularly spaced (first offending row near "
            f"line {worst}); resample the data to a regular grid before estimating"
        )
    return ObservationGrid(values, mesh, origin_time=float(times[0]))


def write_grid_csv(grid, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time"] + [f"X{j + 1}" for j in range(grid.dim)])
        for t, row in zip(grid.times, grid.values):
            w.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in row])
