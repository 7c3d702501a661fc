import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import T0, make_series
from hivetemp.collapse_stats import (
    DEFAULT_EDGES,
    collapse_onset_statistical,
    divergence_error,
    error_curve,
    error_curve_csv,
    increment_pdf,
    rolling_mean_std,
    rolling_stats_csv,
    std_increments,
)
from hivetemp.errors import BinMismatch, ConfigError, EmptyIncrements, TooFewWindows, WindowTooLong
from hivetemp.synth import EnvModel, degradation_scenario, gen_env

DAY = 1440


def test_rolling_mean_std_matches_naive():
    rng = np.random.default_rng(0)
    s = make_series(rng.normal(20, 3, 12 * 96), interval=15)
    r = rolling_mean_std(s, 4.0, step=360)
    W = 4 * 96
    for k, (m, sd) in enumerate(zip(r.mean, r.std)):
        seg = s.temps[k * 24: k * 24 + W]
        assert m == pytest.approx(seg.mean())
        assert sd == pytest.approx(np.std(seg))
    assert r.t_center[0] == T0 + 2 * DAY
    assert len(r) == (12 * 96 - W) // 24 + 1


def test_rolling_skips_windows_with_gaps():
    t = T0 + 15 * np.array([k for k in range(8 * 96) if not 300 <= k < 310])
    s = make_series(np.ones(len(t)), times=t)
    full = rolling_mean_std(make_series(np.ones(8 * 96)), 4.0, 360)
    holed = rolling_mean_std(s, 4.0, 360)
    assert len(holed) < len(full)
    assert all(not (c - 2 * DAY <= T0 + 15 * 300 < c + 2 * DAY) for c in holed.t_center)


def test_rolling_errors():
    s = make_series(np.ones(96 * 5))
    with pytest.raises(ConfigError):
        rolling_mean_std(s, 3.0)
    with pytest.raises(ConfigError):
        rolling_mean_std(s, 4.0, step=20)
    with pytest.raises(WindowTooLong):
        rolling_mean_std(make_series(np.ones(96)), 4.0)
    with pytest.raises(TooFewWindows):
        std_increments(rolling_mean_std(make_series(np.ones(4 * 96)), 4.0))


def test_increment_pdf():
    p = increment_pdf([0.0, 0.01, -5.0, 2.0, 9.0])
    assert p.probabilities.sum() == pytest.approx(1.0)
    assert p.n == 5 and p.n_clamped == 2
    assert p.probabilities[0] == pytest.approx(0.2)  # -5 lands in the first bin
    assert p.probabilities[-1] == pytest.approx(0.4)  # 2.0 (edge) and 9.0
    with pytest.raises(EmptyIncrements):
        increment_pdf([])
    with pytest.raises(ConfigError):
        increment_pdf([1.0], [0.0, 0.0, 1.0])


def test_divergence_known_values():
    a = increment_pdf([0.0, 0.0])
    b = increment_pdf([1.0, 1.0])
    c = increment_pdf([0.0, 1.0])
    assert divergence_error(a, a) == 0.0
    assert divergence_error(a, b) == pytest.approx(4.0)  # disjoint: (1 + 1)^2
    assert divergence_error(a, c) == pytest.approx(1.0)
    with pytest.raises(BinMismatch):
        divergence_error(a, increment_pdf([0.0], np.linspace(-1, 1, 5)))


vals = st.lists(st.floats(-3, 3, allow_nan=False), min_size=1, max_size=50)


@given(vals, vals)
def test_divergence_bounds_and_symmetry(x, y):
    px, py = increment_pdf(x), increment_pdf(y)
    d = divergence_error(px, py)
    assert 0.0 <= d <= 4.0 + 1e-12
    assert d == pytest.approx(divergence_error(py, px))
    assert divergence_error(px, px) == 0.0


def test_error_zero_for_offset_hive():
    env = gen_env(EnvModel(span=20, noise_sigma=0.3, weather_sigma=2.0, amp_jitter=0.3, seed=4))
    hive = env.replace(sensor_id="hive", temps=env.temps + 3.0)
    curve = error_curve(env, hive)
    assert np.all(curve.mean == 0.0)


def test_error_curve_shapes_and_csv():
    env = gen_env(EnvModel(span=16, noise_sigma=0.3, seed=2))
    hive = env.replace(temps=34.0 + 0.01 * (env.temps - 22.0))
    curve = error_curve(env, hive, windows=(4, 5))
    assert len(curve.t) == len(curve.mean) == len(curve.stderr)
    assert np.all(curve.n_windows >= 1)
    text = error_curve_csv(curve)
    assert text.startswith("t,error_mean,error_stderr,n_windows\n")
    stats = rolling_mean_std(env, 4.0)
    assert rolling_stats_csv({"env": stats}).count("\n") == len(stats) + 1


def test_onset_tracks_band_exit():
    # predicted hive mean 34.5 - 2.5 m leaves [33, 36] at m = 0.6,
    # reached after (0.6 - 0.05) / 0.95 * 30 = 17.37 days
    sd = degradation_scenario(env_model=EnvModel(noise_sigma=0.1))
    ds = sd.dataset
    res = collapse_onset_statistical(ds.env, ds.hives["degrading"])
    assert res.onset is not None
    assert abs((res.onset - ds.env.start) / DAY - 17.37) <= 2.0
    assert collapse_onset_statistical(ds.env, ds.hives["healthy"]).onset is None


def test_onset_requires_both_conditions():
    env = gen_env(EnvModel(span=20, noise_sigma=0.1, weather_sigma=2.0, amp_jitter=0.3, weather_days=3))
    # hive follows the environment but stays inside the band on average
    inside = env.replace(temps=34.5 + (env.temps - env.temps.mean()) * 0.2)
    assert collapse_onset_statistical(env, inside).onset is None
    # hive follows the environment and sits well below the band
    outside = env.replace(temps=env.temps + 2.0)
    res = collapse_onset_statistical(env, outside)
    assert res.onset == res.hive_stats.t_center[0]
