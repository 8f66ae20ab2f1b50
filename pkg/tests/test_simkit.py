import math

import numpy as np
import pytest
from scipy import stats

from volfunctionals import testfn
from volfunctionals.errors import ConfigError
from volfunctionals.matcore import is_psd
from volfunctionals.simkit import (
    CIRVol,
    ConstantVol,
    HestonType,
    Jumps,
    ModelSpec,
    _cir_kernel,
    _heston_kernel,
    model_from_section,
    parse_matrix,
    read_config,
    rng_stream,
    simulate,
    write_path,
)
from volfunctionals.spotvol import TuningPlan, select_truncation, select_window, spot_estimates


def test_rng_streams_are_deterministic_and_distinct():
    a = rng_stream(7, 3).random(5)
    np.testing.assert_array_equal(a, rng_stream(7, 3).random(5))
    assert not np.array_equal(a, rng_stream(7, 4).random(5))
    assert not np.array_equal(a, rng_stream(8, 3).random(5))


def test_rng_stream_values_are_pinned():
    # guards against silent changes of the bit generator or key derivation
    u = rng_stream(0, 0).random(3)
    again = np.random.Generator(np.random.Philox(np.random.SeedSequence(0, spawn_key=(0,)))).random(3)
    np.testing.assert_array_equal(u, again)


def test_rng_streams_uncorrelated():
    u0 = rng_stream(11, 0).random(10_000)
    u1 = rng_stream(11, 1).random(10_000)
    assert abs(np.corrcoef(u0, u1)[0, 1]) < 0.05


def test_rng_chi_square_uniformity():
    bins = 100
    counts = np.bincount((rng_stream(2024, 5).random(100_000) * bins).astype(int), minlength=bins)
    expected = 100_000 / bins
    statistic = float(np.sum((counts - expected) ** 2 / expected))
    assert statistic < stats.chi2.ppf(0.99, bins - 1)


def test_same_seed_same_path():
    spec = ModelSpec(CIRVol(), n=200, jumps=Jumps(3.0))
    a, b = simulate(spec, 9, 2), simulate(spec, 9, 2)
    np.testing.assert_array_equal(a.grid.values, b.grid.values)
    np.testing.assert_array_equal(a.jump_times, b.jump_times)


def test_realized_variance_of_brownian_path():
    spec = ModelSpec(ConstantVol(np.eye(1)), n=4)
    reps = 4000
    rv = np.array([np.sum(simulate(spec, 1, r).grid.increments() ** 2) for r in range(reps)])
    assert abs(rv.mean() - 1.0) < 4 * math.sqrt(2 / 4 / reps)


def test_jump_count_is_poisson():
    spec = ModelSpec(ConstantVol(np.eye(1)), n=10, jumps=Jumps(2.0))
    reps = 2000
    counts = np.array([len(simulate(spec, 4, r).jump_times) for r in range(reps)])
    assert abs(counts.mean() - 2.0) < 3 * math.sqrt(2 / reps)
    assert abs(counts.var() - 2.0) < 0.3


def test_jumps_land_in_the_right_interval():
    spec = ModelSpec(ConstantVol(np.eye(2)), n=50, jumps=Jumps(20.0, "two_point", 0.3))
    path = simulate(spec, 3)
    diff = path.grid.increments() - path.continuous.increments()
    expected = np.zeros_like(diff)
    for t, size in zip(path.jump_times, path.jump_sizes):
        expected[math.ceil(t / spec.mesh) - 1] += size
    np.testing.assert_allclose(diff, expected, atol=1e-14)
    assert np.all(np.abs(path.jump_sizes) == 0.3)


def test_constant_vol_truth():
    spec = ModelSpec(ConstantVol(np.array([[2.0]])), n=100, horizon=1.5)
    path = simulate(spec, 0, functions=[testfn.power(2), testfn.power(1)])
    assert path.truth["power:p=2"] == 4.0 * 1.5
    assert path.truth["power:p=1"] == 2.0 * 1.5


def test_identity_truth_is_riemann_sum_of_spot():
    spec = ModelSpec(CIRVol(dim=2, rho=0.4), n=100)
    g = testfn.identity_component(0, 1, dim=2)
    path = simulate(spec, 0, functions=[g])
    assert path.truth[g.name] == pytest.approx(path.fine_mesh * path.true_spot[:, 0, 1].sum(), rel=1e-12)


def test_constant_vol_increments_are_gaussian():
    spec = ModelSpec(ConstantVol(np.array([[0.7]])), n=100_000)
    z = simulate(spec, 12).grid.increments()[:, 0] / math.sqrt(spec.mesh * 0.7)
    kurt = stats.kurtosis(z, fisher=False)
    assert abs(kurt - 3.0) < 0.2
    assert abs(z.var() - 1.0) < 0.02


def _coupled_noise(rng, m):
    fine = rng.standard_normal((2 * m, 1))
    coarse = (fine[0::2] + fine[1::2]) / math.sqrt(2)
    return fine, coarse


def test_cir_truth_stable_under_substep_doubling():
    # drive both schemes with the same Brownian path so only discretization differs
    rng = np.random.default_rng(0)
    n, sub, t = 1000, 10, 1.0
    m = n * sub
    zv_f, zv_c = _coupled_noise(rng, m)
    zx_f, zx_c = _coupled_noise(rng, m)
    chol = np.eye(1)
    _, v_c = _cir_kernel(np.ones(1), 5.0, 1.0, 0.5, chol, t / m, sub, zv_c, zx_c)
    _, v_f = _cir_kernel(np.ones(1), 5.0, 1.0, 0.5, chol, t / (2 * m), 2 * sub, zv_f, zx_f)
    for p in (1, 2):
        coarse = (t / m) * np.sum(v_c**p)
        fine = (t / (2 * m)) * np.sum(v_f**p)
        assert abs(coarse / fine - 1) < 0.01


def test_heston_truth_stable_under_substep_doubling():
    rng = np.random.default_rng(1)
    n, sub, t = 1000, 10, 1.0
    m = n * sub
    zy_f, zy_c = _coupled_noise(rng, m)
    zx_f, zx_c = _coupled_noise(rng, m)
    args = (0.0, 0.0, 0.0, 0.0, 1.0, 0.5, 1.0, 0.5)
    _, c_c = _heston_kernel(*args, t / m, sub, zy_c[:, 0], zx_c[:, 0])
    _, c_f = _heston_kernel(*args, t / (2 * m), 2 * sub, zy_f[:, 0], zx_f[:, 0])
    coarse = (t / m) * np.sum(c_c**2)
    fine = (t / (2 * m)) * np.sum(c_f**2)
    assert abs(coarse / fine - 1) < 0.01


def test_truncation_catches_jump_increments():
    spec = ModelSpec(ConstantVol(np.eye(1)), n=10_000, jumps=Jumps(5.0))
    plan = TuningPlan()
    fractions = []
    for r in range(100):
        path = simulate(spec, 21, r)
        u = select_truncation(path.grid, plan).level
        fractions.append(spot_estimates(path.grid, select_window(spec.n, spec.mesh, plan), u)
                         .truncated_fraction)
    ratio = np.mean(fractions) / (5.0 / spec.n)
    assert 0.5 < ratio < 2.0


def test_cir_spot_is_psd_even_without_feller():
    vol = CIRVol(kappa=1.0, vbar=0.2, xi=2.0, v0=0.05, dim=2, rho=-0.6)
    assert not vol.feller
    path = simulate(ModelSpec(vol, n=2000), 5)
    assert np.all(is_psd(path.true_spot, 0.0))
    assert np.all(np.isfinite(path.grid.values))


def test_heston_type_runs():
    path = simulate(ModelSpec(HestonType(drift_level=0.1), n=500), 5, functions=[testfn.power(2)])
    c = path.true_spot[:, 0, 0]
    assert np.all(c > 0)
    assert path.truth["power:p=2"] == pytest.approx(path.fine_mesh * np.sum(c**2), rel=1e-12)


def test_model_validation():
    with pytest.raises(ConfigError):
        ConstantVol(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(ConfigError):
        CIRVol(rho=1.0)
    with pytest.raises(ConfigError):
        Jumps(0.0)
    with pytest.raises(ConfigError):
        ModelSpec(ConstantVol(np.eye(1)), n=0)


def test_parse_matrix():
    np.testing.assert_array_equal(parse_matrix("2", 1), [[2.0]])
    np.testing.assert_array_equal(parse_matrix("1,0.5;0.5,1", 2), [[1, 0.5], [0.5, 1]])
    with pytest.raises(ConfigError):
        parse_matrix("1,2,3", 2)


def test_model_from_config(tmp_path):
    cfg = tmp_path / "m.ini"
    cfg.write_text("[model]\ndim = 2\nkind = custom_cir_vol\nrho = 0.3\nn = 500\n"
                   "jump_intensity = 4\njump_distribution = two_point\n")
    spec = model_from_section(read_config(cfg)["model"])
    assert isinstance(spec.vol, CIRVol) and spec.vol.rho == 0.3 and spec.dim == 2
    assert spec.n == 500 and spec.jumps.distribution == "two_point"
    cfg.write_text("[model]\nkind = nope\n")
    with pytest.raises(ConfigError):
        model_from_section(read_config(cfg)["model"])
    cfg.write_text("[model]\nn = many\n")
    with pytest.raises(ConfigError):
        model_from_section(read_config(cfg)["model"])


def test_config_syntax_error_reports_line(tmp_path):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[model]\nn = 5\nthis line is broken\n")
    with pytest.raises(ConfigError, match=r"line\s+3"):
        read_config(cfg)


def test_truth_sidecar(tmp_path):
    spec = ModelSpec(ConstantVol(np.eye(1)), n=20, jumps=Jumps(30.0))
    path = simulate(spec, 1, functions=[testfn.power(2)])
    write_path(path, tmp_path / "p.csv", tmp_path / "p.truth")
    text = (tmp_path / "p.truth").read_text()
    assert "[truth]\npower:p=2=1\n" in text
    assert f"[jumps]\ncount={len(path.jump_times)}\n" in text
    assert len((tmp_path / "p.csv").read_text().splitlines()) == 22
