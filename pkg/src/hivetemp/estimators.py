"""Thermoregulation model and the two indicator estimators.

The model ties hive temperature to environmental temperature through a
slope ``m``, an offset ``delta_t`` and a desired temperature ``t_d``::

    T_H = (T_E - (t_d - delta_t)) * m + t_d

with ``T_H`` read a delay ``tau`` after ``T_E``. The status indicator is
``pi = -ln(m)``, capped at :data:`PI_CAP`.

Two estimators are provided. The *extremes* method fits the model to daily
environmental extremes and the hive response that follows them. The
*crosscorr* method takes the lag of maximum Pearson correlation and turns
the correlation into a slope via ``m = rho * sigma_H / sigma_E``.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta, timezone
from enum import Enum
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    DegenerateSlope,
    InsufficientOverlap,
    InsufficientPairs,
    NegativeSlope,
    NoResponseSamples,
    ZeroVariance,
)
from .ingest import (
    DEFAULT_MAX_GAP,
    HiveDataset,
    TemperatureSeries,
    align_detailed,
    format_instant,
    from_minutes,
    parse_instant,
    to_minutes,
)

PI_CAP = 6.0
M_FLOOR = math.exp(-PI_CAP)
DEFAULT_T_D = 34.5
T_D_BAND = (33.0, 36.0)
N_MIN_PAIRS = 4
N_MIN_SAMPLES = 96
RESPONSE_WINDOW = 120
MAX_LAG = 240
WINDOW_DAYS = 7.0
METHOD1_STEP = 12 * 60

# Local-time search windows for the daily extremes, minutes after midnight.
MAX_SEARCH = (6 * 60, 18 * 60)
MIN_SEARCH = (17 * 60, 17 * 60 + 24 * 60)

# Per-sample variance (degC^2) below which a window counts as constant.
# One 0.0625 degC quantization step in a week of 15-min data is ~6e-6.
ZERO_VAR_TOL = 1e-9


class Method(str, Enum):
    EXTREMES = "extremes"
    CROSSCORR = "crosscorr"


class ExtremeKind(str, Enum):
    DAILY_MAX = "daily_max"
    DAILY_MIN = "daily_min"


@dataclass(frozen=True)
class ThermoModel:
    m: float
    delta_t: float
    t_d: float = DEFAULT_T_D

    def __post_init__(self):
        if not 0.0 <= self.m <= 1.0:
            raise ValueError(f"slope m={self.m} outside [0, 1]")
        if self.delta_t < 0:
            raise ValueError(f"delta_t={self.delta_t} must be non-negative")

    @property
    def pi(self) -> float:
        return pi_of_slope(self.m)


@dataclass(frozen=True)
class ExtremeEvent:
    t: int
    value: float
    kind: ExtremeKind


@dataclass(frozen=True)
class ExtremePair:
    t_ext: int
    te_ext: float
    th_resp: float
    kind: ExtremeKind


@dataclass(frozen=True)
class WindowEstimate:
    """One rolling-window estimate.

    ``pi`` and ``delta_t`` are ``None`` when they cannot be defined. The
    ``reason`` explains a degenerate window: ``perfect`` (flat hive),
    ``floor`` (slope below :data:`M_FLOOR`), ``negative_slope``,
    ``anticorrelated`` or ``invalid`` (flat environment / no spread).
    """

    t_center: int
    method: Method
    m: float | None
    pi: float | None
    delta_t: float | None
    tau_star: int | None
    rho_star: float | None
    n: int
    degenerate: bool = False
    utc_offset: int = 0
    reason: str | None = None

    @property
    def clamped(self) -> bool:
        return self.m is not None and self.m > 1.0

    @property
    def valid(self) -> bool:
        return self.pi is not None

    @property
    def when(self) -> datetime:
        return from_minutes(self.t_center, self.utc_offset)


@dataclass(frozen=True)
class LagGrid:
    lags: tuple[int, ...]

    def __post_init__(self):
        lags = tuple(int(x) for x in self.lags)
        if not lags:
            raise ConfigError("lag grid is empty")
        if any(x < 0 for x in lags):
            raise ConfigError("lags must be non-negative")
        if max(lags) > MAX_LAG:
            raise ConfigError(f"lags must not exceed {MAX_LAG} min")
        if list(lags) != sorted(set(lags)):
            raise ConfigError("lags must be strictly increasing")
        object.__setattr__(self, "lags", lags)

    @classmethod
    def default(cls, interval: int, max_lag: int = MAX_LAG) -> "LagGrid":
        return cls(tuple(range(0, max_lag + 1, interval)))

    def check(self, interval: int) -> None:
        bad = [x for x in self.lags if x % interval]
        if bad:
            raise ConfigError(f"lags {bad} are not multiples of the {interval}-min interval")


# -- the model ---------------------------------------------------------------

def predict_hive_temp(model: ThermoModel, te: float) -> float:
    return (te - (model.t_d - model.delta_t)) * model.m + model.t_d


def pi_of_slope(m: float) -> float:
    """``-ln(m)``, capped at :data:`PI_CAP` and floored at 0 for ``m > 1``."""
    if not math.isfinite(m):
        raise ValueError(f"slope {m} is not finite")
    if m < 0:
        raise NegativeSlope(f"slope {m} < 0")
    if m <= M_FLOOR:
        return PI_CAP
    if m >= 1.0:
        return 0.0
    return -math.log(m)


def delta_t_from_window(m: float, mean_th: float, mean_te: float, t_d: float) -> float:
    if m <= M_FLOOR:
        raise DegenerateSlope(f"slope {m} at or below floor {M_FLOOR:.4g}")
    return (mean_th - t_d) / m + t_d - mean_te


def delta_t_from_intercept(m: float, intercept: float, t_d: float) -> float:
    if m <= M_FLOOR:
        raise DegenerateSlope(f"slope {m} at or below floor {M_FLOOR:.4g}")
    return (intercept - t_d * (1.0 - m)) / m


def calibrate_t_d(hive: TemperatureSeries, start: int, end: int) -> float:
    """Mean hive temperature over a reference period known to be healthy."""
    ref = hive.between(start, end)
    if len(ref) == 0:
        raise DataError("no hive samples in the calibration period")
    return float(np.mean(ref.temps))


# -- method 1: daily extremes ------------------------------------------------

def _local_midnight(day: date, utc_offset: int) -> int:
    tz = timezone(timedelta(minutes=utc_offset))
    return to_minutes(datetime.combine(day, time(0, 0), tzinfo=tz))


def _extreme_in(env: TemperatureSeries, start: int, end: int, kind: ExtremeKind):
    lo, hi = np.searchsorted(env.times, [start, end], side="left")
    if hi - lo < (end - start) // env.interval:
        return None
    seg = env.temps[lo:hi]
    k = int(np.argmax(seg) if kind is ExtremeKind.DAILY_MAX else np.argmin(seg))
    return ExtremeEvent(int(env.times[lo + k]), float(seg[k]), kind)


def daily_extremes(
    env: TemperatureSeries, day: date
) -> tuple[ExtremeEvent | None, ExtremeEvent | None]:
    """Daily maximum in [06:00, 18:00) and minimum in [17:00, 17:00 next day).

    Windows are in the series' local time. A window with any missing sample
    yields ``None`` for that event; ties go to the earliest sample.
    """
    midnight = _local_midnight(day, env.utc_offset)
    mx = _extreme_in(env, midnight + MAX_SEARCH[0], midnight + MAX_SEARCH[1], ExtremeKind.DAILY_MAX)
    mn = _extreme_in(env, midnight + MIN_SEARCH[0], midnight + MIN_SEARCH[1], ExtremeKind.DAILY_MIN)
    return mx, mn


def response_after_extreme(
    hive: TemperatureSeries, event: ExtremeEvent | tuple[int, float], kind: ExtremeKind | None = None
) -> float:
    """Hive extreme in ``(t_event, t_event + 2 h]``: max after a max, min after a min."""
    if isinstance(event, ExtremeEvent):
        t, kind = event.t, kind or event.kind
    else:
        t = event[0]
    if kind is None:
        raise ValueError("extreme kind required")
    lo, hi = np.searchsorted(hive.times, [t, t + RESPONSE_WINDOW], side="right")
    if hi <= lo:
        raise NoResponseSamples(f"no hive samples within 2 h after {format_instant(t, hive.utc_offset)}")
    seg = hive.temps[lo:hi]
    return float(seg.max() if ExtremeKind(kind) is ExtremeKind.DAILY_MAX else seg.min())


def extreme_pairs(env: TemperatureSeries, hive: TemperatureSeries) -> list[ExtremePair]:
    """All daily extreme/response pairs available in the overlap of two series."""
    if len(env) == 0:
        return []
    first = from_minutes(env.start, env.utc_offset).date() - timedelta(days=1)
    last = from_minutes(env.end, env.utc_offset).date()
    pairs = []
    day = first
    while day <= last:
        for event in daily_extremes(env, day):
            if event is None:
                continue
            try:
                resp = response_after_extreme(hive, event)
            except NoResponseSamples:
                continue
            pairs.append(ExtremePair(event.t, event.value, resp, event.kind))
        day += timedelta(days=1)
    pairs.sort(key=lambda p: p.t_ext)
    return pairs


def filter_extreme_pairs(pairs: Sequence[ExtremePair]) -> list[ExtremePair]:
    """Drop maxima lower than the highest minimum among the same pairs."""
    mins = [p.te_ext for p in pairs if p.kind is ExtremeKind.DAILY_MIN]
    if not mins:
        return list(pairs)
    ceiling = max(mins)
    return [p for p in pairs if p.kind is ExtremeKind.DAILY_MIN or p.te_ext >= ceiling]


def method1_estimate(
    pairs: Sequence[ExtremePair],
    t_d: float = DEFAULT_T_D,
    n_min: int = N_MIN_PAIRS,
    t_center: int | None = None,
    utc_offset: int = 0,
) -> WindowEstimate:
    """Joint least-squares fit of ``th_resp = m * te_ext + b`` over the pairs."""
    n = len(pairs)
    if n < n_min:
        raise InsufficientPairs(n, n_min)
    x = np.array([p.te_ext for p in pairs])
    y = np.array([p.th_resp for p in pairs])
    if t_center is None:
        t_center = int(round(np.mean([p.t_ext for p in pairs])))
    est = dict(t_center=t_center, method=Method.EXTREMES, tau_star=None, rho_star=None,
               n=n, utc_offset=utc_offset)
    dx = x - x.mean()
    sxx = float(dx @ dx)
    if sxx <= ZERO_VAR_TOL * n:
        return WindowEstimate(m=None, pi=None, delta_t=None, degenerate=True, reason="invalid", **est)
    m = float(dx @ (y - y.mean())) / sxx
    b = float(y.mean() - m * x.mean())
    if m < 0:
        return WindowEstimate(m=m, pi=None, delta_t=None, degenerate=True,
                              reason="negative_slope", **est)
    pi = pi_of_slope(m)
    if m <= M_FLOOR:
        return WindowEstimate(m=m, pi=pi, delta_t=None, degenerate=True, reason="floor", **est)
    return WindowEstimate(m=m, pi=pi, delta_t=delta_t_from_intercept(m, b, t_d), **est)


# -- method 2: cross-correlation ---------------------------------------------

class BestLag(NamedTuple):
    tau_star: int
    rho_star: float
    degenerate: bool


def _lagged_pairs(x: TemperatureSeries, y: TemperatureSeries, tau: int):
    target = x.times + tau
    idx = np.searchsorted(y.times, target)
    idx_c = np.clip(idx, 0, max(len(y) - 1, 0))
    hit = (idx < len(y)) & (y.times[idx_c] == target)
    return x.temps[hit], y.temps[idx_c[hit]]


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    if a.max() == a.min() or b.max() == b.min():
        raise ZeroVariance("constant segment")
    da, db = a - a.mean(), b - b.mean()
    r = float(da @ db) / math.sqrt(float(da @ da) * float(db @ db))
    return min(1.0, max(-1.0, r))


def cross_correlation(
    x: TemperatureSeries, y: TemperatureSeries, tau: int, n_min: int = N_MIN_SAMPLES
) -> float:
    """Pearson correlation of the pairs ``(x(t), y(t + tau))``."""
    if tau % x.interval:
        raise ConfigError(f"lag {tau} is not a multiple of the {x.interval}-min interval")
    a, b = _lagged_pairs(x, y, tau)
    if len(a) < n_min:
        raise InsufficientOverlap(f"{len(a)} overlapping samples at lag {tau}, need {n_min}")
    return _pearson(a, b)


def best_lag(
    x: TemperatureSeries, y: TemperatureSeries, grid: LagGrid, n_min: int = N_MIN_SAMPLES
) -> BestLag:
    """Lag of maximum correlation; ties go to the smallest lag.

    The result is flagged degenerate when no lag has positive correlation.
    """
    best = None
    for tau in grid.lags:
        try:
            r = cross_correlation(x, y, tau, n_min)
        except InsufficientOverlap:
            continue
        if best is None or r > best[1]:
            best = (tau, r)
    if best is None:
        raise InsufficientOverlap("no lag in the grid has enough overlapping samples")
    return BestLag(best[0], best[1], best[1] <= 0.0)


def _method2_from_moments(
    t_center, utc_offset, n, tau, rho, sx, sy, mean_x, mean_y, t_d
) -> WindowEstimate:
    est = dict(t_center=t_center, method=Method.CROSSCORR, n=n, utc_offset=utc_offset,
               tau_star=tau, rho_star=rho)
    m = rho * sy / sx
    if rho <= 0:
        return WindowEstimate(m=m, pi=None, delta_t=None, degenerate=True,
                              reason="anticorrelated", **est)
    pi = pi_of_slope(m)
    if m <= M_FLOOR:
        return WindowEstimate(m=m, pi=pi, delta_t=None, degenerate=True, reason="floor", **est)
    return WindowEstimate(m=m, pi=pi, delta_t=delta_t_from_window(m, mean_y, mean_x, t_d), **est)


def _perfect(t_center, utc_offset, n, method=Method.CROSSCORR) -> WindowEstimate:
    return WindowEstimate(t_center, method, 0.0, PI_CAP, None, None, None, n, True,
                          utc_offset, "perfect")


def _invalid(t_center, utc_offset, n, method=Method.CROSSCORR) -> WindowEstimate:
    return WindowEstimate(t_center, method, None, None, None, None, None, n, True,
                          utc_offset, "invalid")


def window_center(series: TemperatureSeries) -> int:
    return (series.start + series.end + series.interval) // 2


def method2_estimate(
    env_window: TemperatureSeries,
    hive_window: TemperatureSeries,
    t_d: float = DEFAULT_T_D,
    grid: LagGrid | None = None,
    n_min: int = N_MIN_SAMPLES,
) -> WindowEstimate:
    """Cross-correlation estimate for one aligned window.

    Standard deviations and means are taken over the lag-shifted overlap at
    the best lag, so ``m`` equals the least-squares slope of those pairs.
    """
    if grid is None:
        grid = LagGrid.default(env_window.interval)
    grid.check(env_window.interval)
    n = len(env_window)
    if n < n_min or len(hive_window) < n_min:
        raise InsufficientOverlap(f"window has {n} samples, need {n_min}")
    tc, off = window_center(env_window), env_window.utc_offset
    if np.ptp(env_window.temps) == 0:
        return _invalid(tc, off, n)
    if np.ptp(hive_window.temps) == 0:
        return _perfect(tc, off, n)
    try:
        tau, rho, _ = best_lag(env_window, hive_window, grid, n_min)
    except ZeroVariance:
        return _invalid(tc, off, n)
    a, b = _lagged_pairs(env_window, hive_window, tau)
    return _method2_from_moments(
        tc, off, len(a), tau, rho, float(a.std()), float(b.std()),
        float(a.mean()), float(b.mean()), t_d,
    )


# -- rolling windows ----------------------------------------------------------

@dataclass
class RollingResult:
    estimates: list[WindowEstimate]
    skipped: Counter = field(default_factory=Counter)
    n_interpolated: int = 0
    n_splits: int = 0


def _full_grid(env: TemperatureSeries, hive: TemperatureSeries):
    """Aligned series scattered onto a gap-free grid with a validity mask."""
    step = env.interval
    grid_t = np.arange(env.start, env.end + 1, step, dtype=np.int64)
    pos = (env.times - env.start) // step
    e = np.zeros(len(grid_t))
    h = np.zeros(len(grid_t))
    valid = np.zeros(len(grid_t), dtype=bool)
    e[pos], h[pos], valid[pos] = env.temps, hive.temps, True
    return grid_t, e, h, valid


def _rolling_crosscorr(
    env: TemperatureSeries,
    hive: TemperatureSeries,
    window: int,
    step: int,
    grid: LagGrid,
    t_d: float,
    n_min: int,
    skipped: Counter,
) -> list[WindowEstimate]:
    interval = env.interval
    W = window // interval
    S = max(step // interval, 1)
    grid_t, e, h, valid = _full_grid(env, hive)
    G = len(grid_t)
    if G < W:
        return []
    starts = np.arange(0, G - W + 1, S)
    bad = np.concatenate(([0], np.cumsum(~valid)))
    ok = (bad[starts + W] - bad[starts]) == 0
    skipped["split"] += int(np.count_nonzero(~ok))
    starts = starts[ok]
    if not len(starts):
        return []

    # Centre both series so the running sums stay well conditioned.
    e = np.where(valid, e - e[valid].mean(), 0.0)
    h = np.where(valid, h - h[valid].mean(), 0.0)
    e_ref, h_ref = env.temps.mean(), hive.temps.mean()

    def prefix(v):
        return np.concatenate(([0.0], np.cumsum(v)))

    Pe, Pee, Ph, Phh = prefix(e), prefix(e * e), prefix(h), prefix(h * h)

    def var_full(P, PP):
        s = P[starts + W] - P[starts]
        return (PP[starts + W] - PP[starts]) / W - (s / W) ** 2

    flat_env = var_full(Pe, Pee) <= ZERO_VAR_TOL
    flat_hive = var_full(Ph, Phh) <= ZERO_VAR_TOL
    # confirm near-zero variance exactly; the tolerance only pre-screens
    for arr, v in ((flat_env, e), (flat_hive, h)):
        for i in np.flatnonzero(arr):
            s = starts[i]
            arr[i] = np.ptp(v[s:s + W]) == 0

    lags = [tau for tau in grid.lags if W - tau // interval >= n_min]
    if not lags:
        skipped["insufficient_overlap"] += len(starts)
        return []

    L = len(lags)
    rho = np.full((L, len(starts)), -np.inf)
    stats = np.zeros((L, 5, len(starts)))
    lag_zero = np.zeros(len(starts), dtype=bool)
    for li, tau in enumerate(lags):
        k = tau // interval
        n = W - k
        Pxy = prefix(e[: G - k] * h[k:])
        sx = Pe[starts + n] - Pe[starts]
        sxx = Pee[starts + n] - Pee[starts]
        sy = Ph[starts + W] - Ph[starts + k]
        syy = Phh[starts + W] - Phh[starts + k]
        sxy = Pxy[starts + n] - Pxy[starts]
        vx = sxx / n - (sx / n) ** 2
        vy = syy / n - (sy / n) ** 2
        cxy = sxy / n - (sx / n) * (sy / n)
        zero = (vx <= ZERO_VAR_TOL) | (vy <= ZERO_VAR_TOL)
        lag_zero |= zero
        with np.errstate(invalid="ignore", divide="ignore"):
            r = np.clip(cxy / np.sqrt(vx * vy), -1.0, 1.0)
        rho[li] = np.where(zero, -np.inf, r)
        stats[li] = (np.sqrt(np.maximum(vx, 0)), np.sqrt(np.maximum(vy, 0)),
                     sx / n + e_ref, sy / n + h_ref, np.full(len(starts), n))

    best = np.argmax(rho, axis=0)
    out = []
    half = W * interval // 2
    for c in range(len(starts)):
        tc = int(grid_t[starts[c]]) + half
        if flat_env[c]:
            out.append(_invalid(tc, env.utc_offset, W))
        elif flat_hive[c]:
            out.append(_perfect(tc, env.utc_offset, W))
        elif lag_zero[c]:
            out.append(_invalid(tc, env.utc_offset, W))
        else:
            li = best[c]
            sx, sy, mx, my, n = stats[li, :, c]
            out.append(_method2_from_moments(
                tc, env.utc_offset, int(n), lags[li], float(rho[li, c]),
                float(sx), float(sy), float(mx), float(my), t_d,
            ))
    return out


def _rolling_extremes(
    env: TemperatureSeries,
    hive: TemperatureSeries,
    window: int,
    step: int,
    t_d: float,
    n_min: int,
    skipped: Counter,
) -> list[WindowEstimate]:
    pairs = extreme_pairs(env, hive)
    t_pairs = np.array([p.t_ext for p in pairs], dtype=np.int64)
    W = window // env.interval
    out = []
    start = env.start
    while start + window <= env.end + env.interval:
        lo, hi = np.searchsorted(env.times, [start, start + window], side="left")
        if hi - lo < W:
            skipped["split"] += 1
        else:
            a, b = np.searchsorted(t_pairs, [start, start + window], side="left")
            chosen = filter_extreme_pairs(pairs[a:b])
            try:
                out.append(method1_estimate(chosen, t_d, n_min, start + window // 2, env.utc_offset))
            except InsufficientPairs:
                skipped["insufficient_pairs"] += 1
        start += step
    return out


def rolling_estimates_detailed(
    dataset: HiveDataset,
    hive_id: str,
    method: Method | str,
    window_days: float = WINDOW_DAYS,
    step: int | None = None,
    t_d: float = DEFAULT_T_D,
    grid: LagGrid | None = None,
    max_gap: int = DEFAULT_MAX_GAP,
    n_min: int | None = None,
) -> RollingResult:
    method = Method(method)
    interval = dataset.interval
    window = int(round(window_days * 1440))
    if window <= 0 or window % interval:
        raise ConfigError(f"window of {window_days} d is not a whole number of samples")
    aligned = align_detailed(dataset.env, dataset.hives[hive_id], max_gap)
    skipped: Counter = Counter()
    if method is Method.CROSSCORR:
        grid = grid or LagGrid.default(interval)
        grid.check(interval)
        step = step or interval
        if step % interval:
            raise ConfigError(f"step {step} is not a multiple of the {interval}-min interval")
        est = _rolling_crosscorr(aligned.env, aligned.hive, window, step, grid, t_d,
                                 n_min or N_MIN_SAMPLES, skipped)
    else:
        step = step or METHOD1_STEP
        est = _rolling_extremes(aligned.env, aligned.hive, window, step, t_d,
                                n_min or N_MIN_PAIRS, skipped)
    return RollingResult(est, skipped, aligned.n_interpolated, aligned.n_splits)


def rolling_estimates(
    dataset: HiveDataset,
    hive_id: str,
    method: Method | str,
    window_days: float = WINDOW_DAYS,
    step: int | None = None,
    t_d: float = DEFAULT_T_D,
    grid: LagGrid | None = None,
    max_gap: int = DEFAULT_MAX_GAP,
    n_min: int | None = None,
) -> list[WindowEstimate]:
    """Estimates over windows of ``window_days`` moved by ``step`` minutes.

    ``step`` defaults to the sampling interval for cross-correlation and to
    12 h for the extremes method. Windows that cross a gap left by
    alignment are skipped.
    """
    return rolling_estimates_detailed(
        dataset, hive_id, method, window_days, step, t_d, grid, max_gap, n_min
    ).estimates


# -- estimate files -------------------------------------------------------------

ESTIMATE_FIELDS = ("t_center", "method", "m", "pi", "delta_t", "tau_star_min",
                   "rho_star", "n", "degenerate")


def _fmt(v: float | None) -> str:
    return "" if v is None else f"{v:.6f}"


def _round(v: float | None) -> float | None:
    return None if v is None else float(f"{v:.6f}")


def estimate_record(est: WindowEstimate) -> dict:
    return {
        "t_center": format_instant(est.t_center, est.utc_offset),
        "method": est.method.value,
        "m": _round(est.m),
        "pi": _round(est.pi),
        "delta_t": _round(est.delta_t),
        "tau_star_min": est.tau_star,
        "rho_star": _round(est.rho_star),
        "n": est.n,
        "degenerate": est.degenerate,
    }


def estimates_to_csv(estimates: Iterable[WindowEstimate]) -> str:
    lines = [",".join(ESTIMATE_FIELDS)]
    for e in estimates:
        lines.append(",".join((
            format_instant(e.t_center, e.utc_offset), e.method.value, _fmt(e.m), _fmt(e.pi),
            _fmt(e.delta_t), "" if e.tau_star is None else str(e.tau_star), _fmt(e.rho_star),
            str(e.n), "true" if e.degenerate else "false",
        )))
    return "\n".join(lines) + "\n"


def estimates_to_jsonl(estimates: Iterable[WindowEstimate]) -> str:
    return "".join(json.dumps(estimate_record(e)) + "\n" for e in estimates)


def _estimate_from_record(rec: dict) -> WindowEstimate:
    def num(key):
        v = rec.get(key)
        return None if v in (None, "") else float(v)

    t = parse_instant(str(rec["t_center"]))
    tau = rec.get("tau_star_min")
    deg = rec.get("degenerate")
    if isinstance(deg, str):
        deg = deg.strip().lower() == "true"
    return WindowEstimate(
        t_center=to_minutes(t),
        method=Method(rec["method"]),
        m=num("m"),
        pi=num("pi"),
        delta_t=num("delta_t"),
        tau_star=None if tau in (None, "") else int(tau),
        rho_star=num("rho_star"),
        n=int(rec["n"]),
        degenerate=bool(deg),
        utc_offset=int(t.utcoffset().total_seconds() // 60),
    )


def parse_estimates(text: str) -> list[WindowEstimate]:
    """Read estimates written as CSV or JSON lines (detected from content)."""
    body = text.strip()
    if not body:
        return []
    if body.startswith("{"):
        return [_estimate_from_record(json.loads(line)) for line in body.splitlines() if line.strip()]
    lines = body.splitlines()
    header = lines[0].strip().split(",")
    if tuple(header) != ESTIMATE_FIELDS:
        raise DataError(f"unexpected estimate header {lines[0]!r}")
    out = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.strip().split(",")
        if len(cells) != len(header):
            raise DataError(f"estimate file line {lineno}: expected {len(header)} fields")
        try:
            out.append(_estimate_from_record(dict(zip(header, cells))))
        except (ValueError, KeyError) as exc:
            raise DataError(f"estimate file line {lineno}: {exc}") from None
    return out
