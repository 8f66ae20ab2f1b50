"""Path simulation for Monte Carlo validation.

Three volatility models:

* ``constant_vol``: ``X = b t + L W`` with ``L L^T = c``; simulated exactly on
  the observation grid.
* ``heston_type``: the Markov model ``dX = a(X) dt + f(t, X, Y) dW``,
  ``dY = -y_reversion Y dt + y_vol dW'`` with ``a(x) = drift_level +
  drift_slope * x`` and ``f = vol_level * exp(vol_loading * Y)``; ``d = 1``.
* ``custom_cir_vol``: independent CIR variance factors per component,
  ``dv = kappa (vbar - v) dt + xi sqrt(v) dW'``, joined by a constant
  correlation ``rho`` (``d = 2``).

``W`` and ``W'`` are independent. Stochastic models run an Euler scheme on a
grid ``euler_substeps`` times finer than the observations; CIR uses full
truncation (``v^+`` in drift and diffusion). Jumps are compound Poisson.
"""

import configparser
import math
from dataclasses import dataclass, field
from typing import Optional

import numba
import numpy as np

from .errors import ConfigError, NumericalError
from .matcore import is_psd
from .spotvol import ObservationGrid, write_grid_csv


def rng_stream(seed, replication=0):
    """Counter-based generator for replication ``replication`` of run ``seed``.

    Philox keyed through ``SeedSequence(seed, spawn_key=(replication,))``:
    streams are independent across indices and identical across platforms.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replication),))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class ConstantVol:
    c: np.ndarray

    kind = "constant_vol"

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.c, dtype=float))
        if c.shape[0] != c.shape[1] or not np.allclose(c, c.T):
            raise ConfigError("constant volatility must be a symmetric matrix")
        if np.linalg.eigvalsh(c)[0] <= 0:
            raise ConfigError("constant volatility must be positive definite")
        object.__setattr__(self, "c", c)

    @property
    def dim(self):
        return self.c.shape[0]


@dataclass(frozen=True)
class HestonType:
    drift_level: float = 0.0
    drift_slope: float = 0.0
    vol_level: float = 1.0
    vol_loading: float = 0.5
    y_reversion: float = 1.0
    y_vol: float = 0.5
    y0: float = 0.0

    kind = "heston_type"
    dim = 1


@dataclass(frozen=True)
class CIRVol:
    kappa: float = 5.0
    vbar: float = 1.0
    xi: float = 0.5
    v0: float = 1.0
    rho: float = 0.0
    dim: int = 1

    kind = "custom_cir_vol"

    def __post_init__(self):
        if self.kappa <= 0 or self.vbar <= 0 or self.xi < 0 or self.v0 <= 0:
            raise ConfigError("CIR parameters must be positive")
        if self.dim not in (1, 2):
            raise ConfigError("CIR model supports d = 1 or d = 2")
        if not -1 < self.rho < 1:
            raise ConfigError("rho must lie in (-1, 1)")

    @property
    def feller(self):
        return 2 * self.kappa * self.vbar >= self.xi**2


@dataclass(frozen=True)
class Jumps:
    """Compound Poisson jumps: ``intensity`` per unit time.

    ``distribution`` is ``"gaussian"`` (each component N(0, scale^2)) or
    ``"two_point"`` (each component +/- scale with equal probability).
    """

    intensity: float
    distribution: str = "gaussian"
    scale: float = 0.5

    def __post_init__(self):
        if self.intensity <= 0:
            raise ConfigError("jump intensity must be positive")
        if self.distribution not in ("gaussian", "two_point"):
            raise ConfigError(f"unknown jump distribution {self.distribution!r}")


@dataclass(frozen=True)
class ModelSpec:
    vol: object
    n: int
    horizon: float = 1.0
    drift: float = 0.0
    jumps: Optional[Jumps] = None
    euler_substeps: int = 10

    def __post_init__(self):
        if self.n < 1 or self.horizon <= 0:
            raise ConfigError("need n >= 1 and a positive horizon")
        if self.euler_substeps < 1:
            raise ConfigError("euler_substeps must be >= 1")

    @property
    def dim(self):
        return self.vol.dim

    @property
    def mesh(self):
        return self.horizon / self.n


@dataclass
class SimulatedPath:
    """Observed grid plus ground truth.

    ``continuous`` is the same path with the jumps removed. ``true_spot`` holds
    ``c`` at the left end of each fine Euler step. ``truth`` maps function
    names to ``V(g)_t`` as a left-point Riemann sum on the fine grid.
    """

    grid: ObservationGrid
    continuous: ObservationGrid
    true_spot: np.ndarray
    fine_mesh: float
    truth: dict = field(default_factory=dict)
    jump_times: np.ndarray = field(default_factory=lambda: np.empty(0))
    jump_sizes: np.ndarray = field(default_factory=lambda: np.empty((0, 1)))
    seed: int = 0
    replication: int = 0


@numba.njit(cache=True)
def _cir_kernel(v0, kappa, vbar, xi, chol, dt, substeps, zv, zx):
    m, d = zv.shape
    n = m // substeps
    sq = math.sqrt(dt)
    inc = np.zeros((n, d))
    vpath = np.empty((m, d))
    v = v0.copy()
    vol = np.empty(d)
    for s in range(m):
        for j in range(d):
            vp = v[j] if v[j] > 0.0 else 0.0
            vpath[s, j] = vp
            vol[j] = math.sqrt(vp)
        i = s // substeps
        for j in range(d):
            acc = 0.0
            for l in range(j + 1):
                acc += chol[j, l] * zx[s, l]
            inc[i, j] += vol[j] * acc * sq
        for j in range(d):
            vp = vpath[s, j]
            v[j] = v[j] + kappa * (vbar - vp) * dt + xi * vol[j] * sq * zv[s, j]
    return inc, vpath


@numba.njit(cache=True)
def _heston_kernel(x0, y0, a0, a1, f0, beta, lam, eta, dt, substeps, zy, zx):
    m = zy.shape[0]
    n = m // substeps
    sq = math.sqrt(dt)
    inc = np.zeros(n)
    cpath = np.empty(m)
    x, y = x0, y0
    for s in range(m):
        sigma = f0 * math.exp(beta * y)
        cpath[s] = sigma * sigma
        dx = (a0 + a1 * x) * dt + sigma * sq * zx[s]
        inc[s // substeps] += dx
        x += dx
        y += -lam * y * dt + eta * sq * zy[s]
    return inc, cpath


def _correlation_cholesky(d, rho):
    corr = np.eye(d)
    if d == 2:
        corr[0, 1] = corr[1, 0] = rho
    return np.linalg.cholesky(corr)


def _spot_from_factors(vpath, chol):
    # c = diag(sqrt v) R diag(sqrt v)
    corr = chol @ chol.T
    s = np.sqrt(vpath)
    return s[:, :, None] * corr * s[:, None, :]


def _simulate_jumps(spec, rng):
    d = spec.dim
    count = rng.poisson(spec.jumps.intensity * spec.horizon)
    times = np.sort(rng.uniform(0.0, spec.horizon, size=count))
    if spec.jumps.distribution == "gaussian":
        sizes = spec.jumps.scale * rng.standard_normal((count, d))
    else:
        sizes = spec.jumps.scale * rng.choice([-1.0, 1.0], size=(count, d))
    return times, sizes


def simulate(spec, seed, replication=0, functions=()):
    """Simulate one path; ``functions`` are the TestFunctions whose truth is recorded."""
    rng = rng_stream(seed, replication)
    d, n, mesh = spec.dim, spec.n, spec.mesh
    vol = spec.vol

    if isinstance(vol, ConstantVol):
        chol = np.linalg.cholesky(vol.c)
        z = rng.standard_normal((n, d))
        inc = spec.drift * mesh + math.sqrt(mesh) * z @ chol.T
        fine_mesh = mesh / spec.euler_substeps
        true_spot = np.broadcast_to(vol.c, (n * spec.euler_substeps, d, d))
        truth = {g.name: spec.horizon * float(np.asarray(g(vol.c))) for g in functions}
    else:
        m = n * spec.euler_substeps
        fine_mesh = spec.horizon / m
        zx = rng.standard_normal((m, d))
        zv = rng.standard_normal((m, d))
        if isinstance(vol, CIRVol):
            chol = _correlation_cholesky(d, vol.rho)
            inc, vpath = _cir_kernel(np.full(d, vol.v0), vol.kappa, vol.vbar, vol.xi,
                                     chol, fine_mesh, spec.euler_substeps, zv, zx)
            inc = inc + spec.drift * mesh
            true_spot = _spot_from_factors(vpath, chol)
        elif isinstance(vol, HestonType):
            inc, cpath = _heston_kernel(0.0, vol.y0, vol.drift_level + spec.drift, vol.drift_slope,
                                        vol.vol_level, vol.vol_loading, vol.y_reversion, vol.y_vol,
                                        fine_mesh, spec.euler_substeps, zv[:, 0], zx[:, 0])
            inc = inc[:, None]
            true_spot = cpath[:, None, None]
        else:
            raise ConfigError(f"unsupported volatility model {vol!r}")
        if not np.all(is_psd(true_spot, 0.0)):
            raise NumericalError("volatility guard failed: non-PSD spot matrix")
        truth = {g.name: fine_mesh * float(np.sum(g(true_spot))) for g in functions}

    continuous = ObservationGrid.from_increments(inc, mesh)
    times, sizes = np.empty(0), np.empty((0, d))
    if spec.jumps is not None:
        times, sizes = _simulate_jumps(spec, rng)
        jumped = inc.copy()
        # a jump at time s lands in the interval ((i-1) mesh, i mesh] holding s
        idx = np.clip(np.ceil(times / mesh).astype(int) - 1, 0, n - 1)
        np.add.at(jumped, idx, sizes)
        grid = ObservationGrid.from_increments(jumped, mesh)
    else:
        grid = continuous
    return SimulatedPath(grid=grid, continuous=continuous, true_spot=true_spot,
                         fine_mesh=fine_mesh, truth=truth, jump_times=times, jump_sizes=sizes,
                         seed=int(seed), replication=int(replication))


# ---------------------------------------------------------------------------
# config files and export


def _floats(text):
    return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]


def parse_matrix(text, dim):
    """``"1"`` or ``"1,0.5;0.5,1"`` (rows separated by semicolons)."""
    rows = [r for r in text.split(";") if r.strip()]
    vals = [_floats(r) for r in rows]
    if dim == 1 and len(vals) == 1 and len(vals[0]) == 1:
        return np.array([[vals[0][0]]])
    arr = np.array(vals, dtype=float)
    if arr.shape != (dim, dim):
        raise ConfigError(f"matrix {text!r} is not {dim}x{dim}")
    return arr


def model_from_section(sec):
    """Build a ModelSpec from an INI section mapping."""
    def get(key, default=None, cast=float):
        if key not in sec:
            if default is None:
                raise ConfigError(f"[model] is missing {key!r}")
            return default
        try:
            return cast(sec[key])
        except ValueError:
            raise ConfigError(f"[model] {key}={sec[key]!r} is not a valid value") from None

    dim = get("dim", 1, int)
    kind = get("kind", "constant_vol", str)
    if kind == "constant_vol":
        vol = ConstantVol(parse_matrix(sec.get("c", "1"), dim))
    elif kind == "custom_cir_vol":
        vol = CIRVol(kappa=get("kappa", 5.0), vbar=get("vbar", 1.0), xi=get("xi", 0.5),
                     v0=get("v0", 1.0), rho=get("rho", 0.0), dim=dim)
    elif kind == "heston_type":
        if dim != 1:
            raise ConfigError("heston_type is one-dimensional")
        vol = HestonType(drift_level=get("drift_level", 0.0), drift_slope=get("drift_slope", 0.0),
                         vol_level=get("vol_level", 1.0), vol_loading=get("vol_loading", 0.5),
                         y_reversion=get("y_reversion", 1.0), y_vol=get("y_vol", 0.5),
                         y0=get("y0", 0.0))
    else:
        raise ConfigError(f"unknown model kind {kind!r}")
    jumps = None
    if get("jump_intensity", 0.0) > 0:
        jumps = Jumps(get("jump_intensity"), get("jump_distribution", "gaussian", str),
                      get("jump_scale", 0.5))
    return ModelSpec(vol=vol, n=get("n", 10000, int), horizon=get("horizon", 1.0),
                     drift=get("drift", 0.0), jumps=jumps,
                     euler_substeps=get("euler_substeps", 10, int))


def read_config(path):
    """Parse a flat INI file; errors carry the offending line number."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return cp


def write_path(path, csv_path, truth_path):
    """Write the observed grid as CSV and a ``key=value`` truth sidecar."""
    write_grid_csv(path.grid, csv_path)
    with open(truth_path, "w") as fh:
        fh.write("[truth]\n")
        for name, val in path.truth.items():
            fh.write(f"{name}={val:.17g}\n")
        fh.write(f"\n[meta]\nseed={path.seed}\nreplication={path.replication}\n"
                 f"horizon={path.grid.horizon:.17g}\nn={path.grid.n}\n")
        fh.write("\n[jumps]\n")
        fh.write(f"count={len(path.jump_times)}\n")
        for t, size in zip(path.jump_times, path.jump_sizes):
            fh.write(f"{t:.17g}=" + ",".join(f"{v:.17g}" for v in size) + "\n")
