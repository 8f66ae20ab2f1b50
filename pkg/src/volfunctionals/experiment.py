"""Monte Carlo replication studies.

An experiment simulates ``replications`` paths per mesh, runs every requested
estimator on every requested function and compares with the fine-grid truth.
Replications are independent (one counter-based stream each) and results
are gathered in replication order, so output does not depend on the number
of workers.
"""

import csv
import dataclasses
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError
from .estimators import KINDS, estimate_from_spots, format_value, prepare_spots
from .simkit import ModelSpec, model_from_section, simulate
from .spotvol import TuningPlan
from .testfn import gaussian_abs_moment, parse_function, power_exponent

REPLICATION_COLUMNS = [
    "replication", "n", "mesh", "function", "estimator", "value", "truth", "error",
    "normalized_error", "avar", "ci_lo", "ci_hi", "covered", "negative", "window",
    "truncated_fraction", "jump_effect", "a1", "a2", "failed", "message",
]
SUMMARY_COLUMNS = [
    "estimator", "function", "n", "mesh", "replications", "failures", "mean_error", "rmse",
    "normalized_mean", "normalized_var", "coverage", "mean_avar", "negative_frequency",
    "mean_abs_jump_effect", "mean_a1", "mean_a2", "loglog_slope",
]


@dataclass(frozen=True)
class ExperimentSpec:
    model: ModelSpec
    plan: TuningPlan = TuningPlan()
    functions: tuple = ("power:p=2",)
    estimators: tuple = ("corrected_overlapping",)
    replications: int = 100
    seed: int = 0
    meshes: Optional[tuple] = None
    ci_level: float = 0.95
    border_correction: bool = True
    avar_correction: bool = True
    jump_effect: bool = False

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.meshes is not None and any(b <= a for a, b in zip(self.meshes, self.meshes[1:])):
            raise ConfigError("meshes must be strictly increasing")
        bad = [k for k in self.estimators if k not in KINDS]
        if bad:
            raise ConfigError(f"unknown estimators {bad}")
        for name in self.functions:
            parse_function(name, self.model.dim)

    @property
    def mesh_list(self):
        return tuple(self.meshes) if self.meshes else (self.model.n,)


@dataclass
class McSummary:
    rows: list
    replications: list
    wall_time: dict = field(default_factory=dict)

    def row(self, estimator, function, n=None):
        for r in self.rows:
            if r["estimator"] == estimator and r["function"] == function and (n is None or r["n"] == n):
                return r
        raise KeyError((estimator, function, n))

    def errors(self, estimator, function, n=None, normalized=True):
        key = "normalized_error" if normalized else "error"
        return np.array([r[key] for r in self.replications
                         if r["estimator"] == estimator and r["function"] == function
                         and (n is None or r["n"] == n) and not r["failed"]])

    def column(self, name, estimator, function, n=None):
        return np.array([r[name] for r in self.replications
                         if r["estimator"] == estimator and r["function"] == function
                         and (n is None or r["n"] == n) and not r["failed"]], dtype=float)


def _empty_row(rep, n, mesh, fname, kind, message):
    row = {c: math.nan for c in REPLICATION_COLUMNS}
    row.update(replication=rep, n=n, mesh=mesh, function=fname, estimator=kind,
               covered=0, negative=0, window=0, failed=1, message=message)
    return row


def run_replication(spec, rep, mesh_index=0):
    """Simulate one path and evaluate every (function, estimator) pair on it."""
    n = spec.mesh_list[mesh_index]
    model = dataclasses.replace(spec.model, n=n)
    mesh = model.mesh
    functions = [parse_function(name, model.dim) for name in spec.functions]
    stream = mesh_index * spec.replications + rep
    rows = []
    try:
        path = simulate(model, spec.seed, stream, functions)
        spots, flags = prepare_spots(path.grid, spec.plan)
        cont_spots = None
        if spec.jump_effect:
            cont_spots, _ = prepare_spots(path.continuous, spec.plan)
    except Exception as exc:  # recorded per replication, never fatal
        return [_empty_row(rep, n, mesh, f, k, f"{type(exc).__name__}: {exc}")
                for f in spec.functions for k in spec.estimators]

    for fname, g in zip(spec.functions, functions):
        truth = path.truth[g.name]
        for kind in spec.estimators:
            try:
                opts = dict(kind=kind, border_correction=spec.border_correction,
                            ci_level=spec.ci_level, theta=spec.plan.theta,
                            avar_correction=spec.avar_correction)
                rep_ = estimate_from_spots(g, path.grid, spots, flags=flags, **opts)
                jump_effect = math.nan
                if cont_spots is not None:
                    other = estimate_from_spots(g, path.continuous, cont_spots, **opts)
                    jump_effect = abs(rep_.value - other.value)
            except Exception as exc:
                rows.append(_empty_row(rep, n, mesh, fname, kind, f"{type(exc).__name__}: {exc}"))
                continue
            err = rep_.value - truth
            lo, hi = rep_.ci if rep_.ci is not None else (math.nan, math.nan)
            tb = rep_.theta_bias
            rows.append(dict(
                replication=rep, n=n, mesh=mesh, function=fname, estimator=kind,
                value=rep_.value, truth=truth, error=err, normalized_error=err / math.sqrt(mesh),
                avar=rep_.avar_estimate, ci_lo=lo, ci_hi=hi,
                covered=int(rep_.ci is not None and lo <= truth <= hi),
                negative=int("negative_value_for_nonnegative_g" in rep_.flags),
                window=rep_.window, truncated_fraction=rep_.truncated_fraction,
                jump_effect=jump_effect,
                a1=tb.a1 if tb else math.nan, a2=tb.a2 if tb else math.nan,
                failed=0, message="",
            ))
    return rows


def _task(args):
    return run_replication(*args)


def _summarize(spec, reps):
    rows = []
    for n in spec.mesh_list:
        for fname in spec.functions:
            for kind in spec.estimators:
                sel = [r for r in reps if r["n"] == n and r["function"] == fname
                       and r["estimator"] == kind]
                ok = [r for r in sel if not r["failed"]]
                col = lambda k: np.array([r[k] for r in ok], dtype=float)  # noqa: E731
                err, z = col("error"), col("normalized_error")
                m = len(ok)
                rows.append(dict(
                    estimator=kind, function=fname, n=n, mesh=spec.model.horizon / n,
                    replications=len(sel), failures=len(sel) - m,
                    mean_error=float(err.mean()) if m else math.nan,
                    rmse=float(math.sqrt(np.mean(err**2))) if m else math.nan,
                    normalized_mean=float(z.mean()) if m else math.nan,
                    normalized_var=float(z.var(ddof=1)) if m > 1 else math.nan,
                    coverage=float(col("covered").mean()) if m else math.nan,
                    mean_avar=float(col("avar").mean()) if m else math.nan,
                    negative_frequency=float(col("negative").mean()) if m else math.nan,
                    mean_abs_jump_effect=float(col("jump_effect").mean()) if m else math.nan,
                    mean_a1=float(col("a1").mean()) if m else math.nan,
                    mean_a2=float(col("a2").mean()) if m else math.nan,
                    loglog_slope=math.nan,
                ))
    if len(spec.mesh_list) >= 2:
        for fname in spec.functions:
            for kind in spec.estimators:
                sub = [r for r in rows if r["function"] == fname and r["estimator"] == kind]
                slope = loglog_slope([r["mesh"] for r in sub], [r["rmse"] for r in sub])
                for r in sub:
                    r["loglog_slope"] = slope
    return rows


def loglog_slope(x, y):
    """Least-squares slope of ``log y`` on ``log x``."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    if not np.all(np.isfinite(ly)):
        return math.nan
    return float(np.polyfit(lx, ly, 1)[0])


def run_mc(spec, workers=None):
    """Run the replication study; returns an :class:`McSummary`."""
    workers = workers or os.cpu_count() or 1
    reps, wall = [], {}
    for i, n in enumerate(spec.mesh_list):
        tasks = [(spec, r, i) for r in range(spec.replications)]
        start = time.perf_counter()
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                chunks = list(pool.map(_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
        else:
            chunks = [_task(t) for t in tasks]
        wall[n] = time.perf_counter() - start
        for rows in chunks:
            reps.extend(rows)
    return McSummary(rows=_summarize(spec, reps), replications=reps, wall_time=wall)


def theoretical_variance_ratio(p):
    """Asymptotic variance of the debiased estimator over the moment baseline, for ``x**p``."""
    m2, m4 = gaussian_abs_moment(2 * p), gaussian_abs_moment(4 * p)
    return 2 * p * p / ((m4 - m2 * m2) / (m2 * m2))


def run_compare(spec, workers=None):
    """Variance of normalized errors: debiased estimator vs. moment baseline, per power function."""
    if spec.model.dim != 1:
        raise ConfigError("compare needs a one-dimensional model")
    for name in spec.functions:
        if power_exponent(parse_function(name, 1)) is None:
            raise ConfigError(f"compare needs power functions, got {name}")
    spec = dataclasses.replace(spec, estimators=("corrected_overlapping", "baseline_moment"))
    summary = run_mc(spec, workers)
    table = []
    for n in spec.mesh_list:
        for name in spec.functions:
            v1 = summary.row("corrected_overlapping", name, n)["normalized_var"]
            v0 = summary.row("baseline_moment", name, n)["normalized_var"]
            p = power_exponent(parse_function(name, 1))
            table.append(dict(function=name, n=n, var_corrected=v1, var_baseline=v0,
                              ratio=v1 / v0 if v0 > 0 else math.nan,
                              theoretical_ratio=theoretical_variance_ratio(p)))
    return table, summary


# ---------------------------------------------------------------------------
# config and output files


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def plan_from_section(sec):
    def opt(key, default, cast=float):
        if key not in sec:
            return default
        try:
            return cast(sec[key])
        except ValueError:
            raise ConfigError(f"[plan] {key}={sec[key]!r} is not a valid value") from None

    varpi = sec.get("varpi", "0.49")
    theta = sec.get("theta", "none")
    return TuningPlan(
        window_exponent=opt("gamma", 0.4),
        window_const=opt("kappa", 2.0),
        trunc_exponent=None if str(varpi).lower() == "none" else float(varpi),
        trunc_const=opt("alpha", 4.0),
        trunc_scale=sec.get("trunc_scale", "bipower"),
        theta=None if str(theta).lower() == "none" else float(theta),
    )


def experiment_from_config(cp):
    """ExperimentSpec from a parsed INI file with [model], [plan], [experiment]."""
    if "model" not in cp:
        raise ConfigError("config needs a [model] section")
    model = model_from_section(cp["model"])
    plan = plan_from_section(cp["plan"] if "plan" in cp else {})
    ex = cp["experiment"] if "experiment" in cp else {}
    split = lambda s, sep: tuple(x.strip() for x in s.split(sep) if x.strip())  # noqa: E731
    try:
        meshes = tuple(int(x) for x in split(ex["meshes"], ",")) if "meshes" in ex else None
        return ExperimentSpec(
            model=model,
            plan=plan,
            functions=split(ex.get("functions", "power:p=2"), ";"),
            estimators=split(ex.get("estimators", "corrected_overlapping"), ","),
            replications=int(ex.get("replications", 100)),
            seed=int(ex.get("seed", 0)),
            meshes=meshes,
            ci_level=float(ex.get("ci_level", 0.95)),
            border_correction=_bool(ex.get("border_correction", "true")),
            avar_correction=_bool(ex.get("avar_correction", "true")),
            jump_effect=_bool(ex.get("jump_effect", "false")),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"[experiment] {exc}") from None


def write_rows(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([format_value(r[c]) for c in columns])


def write_mc_outputs(summary, out_dir):
    """``summary.csv``, ``replications.csv`` and ``timing.csv`` in ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    write_rows(os.path.join(out_dir, "summary.csv"), SUMMARY_COLUMNS, summary.rows)
    write_rows(os.path.join(out_dir, "replications.csv"), REPLICATION_COLUMNS, summary.replications)
    # Wall time varies run to run; kept apart so the two files above are reproducible.
    write_rows(os.path.join(out_dir, "timing.csv"), ["n", "wall_time_seconds"],
               [{"n": n, "wall_time_seconds": t} for n, t in summary.wall_time.items()])
