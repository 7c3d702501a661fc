"""Seeded synthetic environment and hive temperature series.

Hive series are produced by running the thermoregulation model forward from
an environmental series with a known (possibly drifting) slope and offset,
so every estimator can be checked against ground truth.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .estimators import DEFAULT_T_D
from .ingest import (
    Hemisphere,
    format_instant,
    HiveDataset,
    SensorKind,
    TemperatureSeries,
    parse_instant,
    to_minutes,
    write_manifest,
    write_series,
)

SENSOR_RESOLUTION = 0.0625
DEFAULT_START = "2020-01-22T00:00:00+11:00"


def quantize(values: np.ndarray, step: float) -> np.ndarray:
    if step <= 0:
        return values
    return np.round(values / step) * step


@dataclass(frozen=True)
class EnvModel:
    """Environmental temperature generator.

    ``phase`` shifts the daily cycle (hours); with the default of 8 h the
    daily maximum falls at 14:00 local time. ``weather_sigma`` and
    ``amp_jitter`` add weather variability: a random offset of the daily
    mean (degC) and a random relative change of the daily amplitude, drawn
    every ``weather_days`` days at local noon and interpolated linearly.
    """

    mean: float = 22.0
    daily_amp: float = 8.0
    seasonal_amp: float = 0.0
    noise_sigma: float = 0.0
    phase: float = 8.0
    span: float = 30.0
    interval: int = 15
    seed: int = 0
    quantization: float = SENSOR_RESOLUTION
    weather_sigma: float = 0.0
    amp_jitter: float = 0.0
    weather_days: int = 1
    start: str = DEFAULT_START

    def __post_init__(self):
        if min(self.daily_amp, self.seasonal_amp, self.noise_sigma,
               self.weather_sigma, self.amp_jitter) < 0:
            raise ValueError("amplitudes and noise levels must be non-negative")
        if self.interval <= 0 or self.span <= 0 or self.weather_days < 1:
            raise ValueError("interval and span must be positive")


@dataclass(frozen=True)
class HiveScenario:
    """Forward-model settings for one hive.

    ``track`` holds ``(day, m, delta_t)`` knots, in days since the start of
    the environmental series, interpolated linearly and held constant
    outside the knot range.
    """

    track: tuple[tuple[float, float, float], ...]
    t_d: float = DEFAULT_T_D
    tau: int = 60
    noise_sigma: float = 0.0
    quantization: float = SENSOR_RESOLUTION
    seed: int = 1

    def __post_init__(self):
        track = tuple(tuple(float(v) for v in k) for k in self.track)
        if not track:
            raise ValueError("track needs at least one knot")
        if any(not 0.0 <= m <= 1.0 for _, m, _ in track):
            raise ValueError("m must stay within [0, 1]")
        if any(b[0] < a[0] for a, b in zip(track, track[1:])):
            raise ValueError("track knots must be time-ordered")
        if self.tau < 0:
            raise ValueError("tau must be non-negative")
        object.__setattr__(self, "track", track)

    @classmethod
    def constant(cls, m: float, delta_t: float, **kw) -> "HiveScenario":
        return cls(((0.0, m, delta_t),), **kw)

    def model_at(self, days: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        k = np.array(self.track)
        return np.interp(days, k[:, 0], k[:, 1]), np.interp(days, k[:, 0], k[:, 2])


def _anchor_curve(rng, n_days: int, every: int, sigma: float, local_days: np.ndarray) -> np.ndarray:
    # random values at local noon every `every` days, linearly interpolated
    at = np.arange(-every, n_days + 2 * every, every) + 0.5
    anchors = rng.normal(0.0, sigma, len(at)) if sigma > 0 else np.zeros(len(at))
    return np.interp(local_days, at, anchors)


def gen_env(model: EnvModel, extra_minutes: int = 0) -> TemperatureSeries:
    """Environmental series over ``span`` days plus ``extra_minutes``."""
    start = parse_instant(model.start)
    t0 = to_minutes(start)
    offset = int(start.utcoffset().total_seconds() // 60)
    n = int(round(model.span * 1440)) // model.interval + extra_minutes // model.interval
    minutes = np.arange(n, dtype=np.int64) * model.interval
    wall = t0 + offset + minutes
    hours_of_day = (wall % 1440) / 60.0
    days = minutes / 1440.0
    local_days = (wall - (wall[0] - wall[0] % 1440)) / 1440.0 if n else days

    rng = np.random.default_rng(model.seed)
    n_days = int(np.ceil(local_days[-1])) + 2 if n else 2
    every = model.weather_days
    weather = _anchor_curve(rng, n_days, every, model.weather_sigma, local_days)
    amp = model.daily_amp * np.maximum(
        1.0 + _anchor_curve(rng, n_days, every, model.amp_jitter, local_days), 0.0
    )
    temps = (
        model.mean
        + weather
        + amp * np.sin(2 * np.pi * (hours_of_day - model.phase) / 24.0)
        + model.seasonal_amp * np.sin(2 * np.pi * days / 365.0)
    )
    if model.noise_sigma > 0:
        temps = temps + rng.normal(0.0, model.noise_sigma, n)
    temps = quantize(temps, model.quantization)
    return TemperatureSeries("env", SensorKind.ENVIRONMENT, model.interval, t0 + minutes, temps, offset)


def gen_hive(env: TemperatureSeries, scen: HiveScenario, sensor_id: str = "hive") -> TemperatureSeries:
    """Hive series driven by ``env`` through the model, delayed by ``tau``.

    The hive reading at ``t + tau`` responds to the environmental reading at
    ``t``; the first ``tau`` minutes of the environmental grid therefore
    have no hive sample.
    """
    if scen.tau % env.interval:
        raise ValueError(f"tau {scen.tau} is not a multiple of the {env.interval}-min interval")
    k = scen.tau // env.interval
    if k >= len(env):
        raise ValueError("environmental series shorter than the delay")
    src = env.temps[: len(env) - k]
    m, dt = scen.model_at((env.times[: len(env) - k] - env.start) / 1440.0)
    temps = (src - (scen.t_d - dt)) * m + scen.t_d
    if scen.noise_sigma > 0:
        rng = np.random.default_rng(scen.seed)
        temps = temps + rng.normal(0.0, scen.noise_sigma, len(temps))
    temps = quantize(temps, scen.quantization)
    return TemperatureSeries(sensor_id, SensorKind.HIVE, env.interval, env.times[k:], temps, env.utc_offset)


@dataclass(frozen=True)
class SynthDataset:
    dataset: HiveDataset
    truth: dict[str, HiveScenario]
    env_model: EnvModel


def synth_dataset(
    env_model: EnvModel,
    scenarios: dict[str, HiveScenario],
    hemisphere: Hemisphere | str = Hemisphere.SOUTH,
    label: str = "synthetic",
    hive_labels: dict[str, str] | None = None,
) -> SynthDataset:
    max_tau = max((s.tau for s in scenarios.values()), default=0)
    env = gen_env(env_model, extra_minutes=max_tau)
    hives = {hid: gen_hive(env, s, hid) for hid, s in scenarios.items()}
    return SynthDataset(HiveDataset(env, hives, hemisphere, label, hive_labels or {}),
                        dict(scenarios), env_model)


def constant_scenario(
    m: float,
    delta_t: float,
    env_model: EnvModel | None = None,
    t_d: float = DEFAULT_T_D,
    tau: int = 60,
    noise_sigma: float = 0.0,
    quantization: float = SENSOR_RESOLUTION,
    seed: int = 1,
    hive_id: str = "hive",
) -> SynthDataset:
    env_model = env_model or EnvModel()
    scen = HiveScenario.constant(m, delta_t, t_d=t_d, tau=tau, noise_sigma=noise_sigma,
                                 quantization=quantization, seed=seed)
    return synth_dataset(env_model, {hive_id: scen}, label="constant")


def degradation_scenario(
    start_m: float = 0.05,
    end_m: float = 1.0,
    drift_days: float = 30.0,
    healthy_m: float | None = None,
    delta_t: float = 10.0,
    lead_days: float = 0.0,
    tail_days: float = 0.0,
    t_d: float = DEFAULT_T_D,
    tau: int = 60,
    noise_sigma: float = 0.1,
    quantization: float = SENSOR_RESOLUTION,
    env_model: EnvModel | None = None,
    seed: int = 0,
) -> SynthDataset:
    """One healthy hive at constant slope and one whose slope drifts linearly.

    The drift runs from ``start_m`` to ``end_m`` over ``drift_days`` after an
    optional constant lead-in; ``healthy_m`` defaults to ``start_m``. The
    environmental span covers lead, drift and tail.
    """
    if not 0.0 <= start_m <= end_m <= 1.0:
        raise ValueError("need 0 <= start_m <= end_m <= 1")
    healthy_m = start_m if healthy_m is None else healthy_m
    span = lead_days + drift_days + tail_days
    env_model = replace(env_model or EnvModel(noise_sigma=noise_sigma, quantization=quantization),
                        span=span, seed=seed)
    common = dict(t_d=t_d, tau=tau, noise_sigma=noise_sigma, quantization=quantization)
    scenarios = {
        "healthy": HiveScenario.constant(healthy_m, delta_t, seed=seed + 1, **common),
        "degrading": HiveScenario(
            ((lead_days, start_m, delta_t), (lead_days + drift_days, end_m, delta_t)),
            seed=seed + 2, **common,
        ),
    }
    return synth_dataset(env_model, scenarios, label="degradation",
                         hive_labels={"healthy": "healthy", "degrading": "collapsed"})


def fleet_scenario(
    n_hives: int = 16,
    span: float = 60.0,
    n_collapsing: int | None = None,
    noise_sigma: float = 0.1,
    env_model: EnvModel | None = None,
    seed: int = 0,
) -> SynthDataset:
    """Many hives on one environment; about half drift to collapse.

    Healthy hives get slopes in [0.005, 0.03] and offsets in [8, 14] degC;
    collapsing hives drift from a healthy slope to 1 over the second half.
    """
    rng = np.random.default_rng(seed)
    n_collapsing = n_hives // 2 if n_collapsing is None else n_collapsing
    env_model = replace(env_model or EnvModel(noise_sigma=noise_sigma), span=span, seed=seed)
    scenarios, labels = {}, {}
    for k in range(n_hives):
        hid = f"h{k:02d}"
        m0 = float(rng.uniform(0.005, 0.03))
        dt = float(rng.uniform(8.0, 14.0))
        if k < n_collapsing:
            track = ((span / 2, m0, dt), (span, 1.0, dt))
            labels[hid] = "collapsed"
        else:
            track = ((0.0, m0, dt),)
            labels[hid] = "healthy"
        scenarios[hid] = HiveScenario(track, noise_sigma=noise_sigma, seed=seed + 1 + k)
    return synth_dataset(env_model, scenarios, label="fleet", hive_labels=labels)


def truth_document(synth: SynthDataset) -> dict:
    return {
        "env_model": asdict(synth.env_model),
        "hives": {
            hid: {
                "track": [{"day": d, "m": m, "delta_t": dt} for d, m, dt in s.track],
                "t_d": s.t_d,
                "tau_min": s.tau,
                "noise_sigma": s.noise_sigma,
                "quantization": s.quantization,
                "seed": s.seed,
            }
            for hid, s in synth.truth.items()
        },
    }


def truth_collapse_onsets(synth: SynthDataset, pi_collapse: float = 1.5) -> dict[str, int]:
    """First time each collapsed-labelled hive's true slope reaches ``exp(-pi_collapse)``."""
    out = {}
    m_c = float(np.exp(-pi_collapse))
    env = synth.dataset.env
    for hid, scen in synth.truth.items():
        if synth.dataset.hive_labels.get(hid) != "collapsed":
            continue
        m, _ = scen.model_at((env.times - env.start) / 1440.0)
        hit = np.flatnonzero(m >= m_c)
        if hit.size:
            out[hid] = int(env.times[hit[0]])
    return out


def write_synth(synth: SynthDataset, out_dir: str | Path) -> list[Path]:
    """Write env/hive CSVs, a dataset manifest and the ground-truth sidecar."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds = synth.dataset
    written = [out / "env.csv"]
    write_series(ds.env, written[0])
    hive_files = {}
    for hid, s in ds.hives.items():
        p = out / f"hive_{hid}.csv"
        write_series(s, p)
        hive_files[hid] = p.name
        written.append(p)
    onsets = {h: format_instant(t, ds.env.utc_offset) for h, t in truth_collapse_onsets(synth).items()}
    write_manifest(out / "manifest.json", "env.csv", hive_files, ds.hemisphere, ds.label,
                   dict(ds.hive_labels), onsets)
    (out / "truth.json").write_text(
        json.dumps(truth_document(synth), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    written += [out / "manifest.json", out / "truth.json"]
    return written
