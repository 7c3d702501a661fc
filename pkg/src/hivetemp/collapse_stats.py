"""Rolling moments, standard-deviation increment PDFs and collapse onset.

A hive that has lost thermoregulation shows a mean temperature outside the
brood band and a rolling standard deviation that follows the environment.
The divergence between the increment distributions of the two rolling
standard deviations is tracked as ``Error = (sum |P_E - P_H|)**2``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    BinMismatch,
    ConfigError,
    EmptyIncrements,
    TooFewWindows,
    WindowTooLong,
)
from .ingest import DEFAULT_MAX_GAP, TemperatureSeries, align, format_instant

WINDOW_RANGE = (4.0, 10.0)
ERROR_WINDOWS = (4, 5, 6, 7, 8, 9, 10)
DEFAULT_STEP = 6 * 60
OPTIMAL_BAND = (33.0, 36.0)
CORR_THRESHOLD = 0.8
MIN_SUFFIX = 4
DEFAULT_EDGES = np.linspace(-2.0, 2.0, 42)


@dataclass(frozen=True, eq=False)
class RollingStats:
    t_center: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    window: float
    utc_offset: int = 0

    def __len__(self) -> int:
        return len(self.t_center)


@dataclass(frozen=True, eq=False)
class IncrementPDF:
    edges: np.ndarray
    probabilities: np.ndarray
    n: int
    n_clamped: int = 0


def rolling_mean_std(series: TemperatureSeries, window: float, step: int = DEFAULT_STEP) -> RollingStats:
    """Mean and population standard deviation over windows of ``window`` days.

    Windows start at the first sample and advance by ``step`` minutes;
    windows with any missing sample are skipped.
    """
    if not WINDOW_RANGE[0] <= window <= WINDOW_RANGE[1]:
        raise ConfigError(f"window must lie in [{WINDOW_RANGE[0]:g}, {WINDOW_RANGE[1]:g}] days")
    if step <= 0 or step % series.interval:
        raise ConfigError(f"step must be a positive multiple of {series.interval} min")
    W = int(round(window * 1440)) // series.interval
    if len(series) == 0 or (series.end - series.start) // series.interval + 1 < W:
        raise WindowTooLong(f"series shorter than the {window:g}-day window")
    n_grid = (series.end - series.start) // series.interval + 1
    values = np.full(n_grid, np.nan)
    values[(series.times - series.start) // series.interval] = series.temps
    views = np.lib.stride_tricks.sliding_window_view(values, W)[:: step // series.interval]
    keep = ~np.isnan(views).any(axis=1)
    views = views[keep]
    starts = series.start + np.flatnonzero(keep) * step
    return RollingStats(
        t_center=starts + W * series.interval // 2,
        mean=views.mean(axis=1),
        std=views.std(axis=1),
        window=float(window),
        utc_offset=series.utc_offset,
    )


def std_increments(stats: RollingStats) -> np.ndarray:
    if len(stats) < 2:
        raise TooFewWindows(f"{len(stats)} window(s); increments need at least 2")
    return np.diff(stats.std)


def increment_pdf(increments: Sequence[float], edges: Sequence[float] | None = None) -> IncrementPDF:
    """Normalised histogram; values beyond the outer edges go to the end bins."""
    x = np.asarray(increments, dtype=float)
    if x.size == 0:
        raise EmptyIncrements("no increments to histogram")
    edges = DEFAULT_EDGES if edges is None else np.asarray(edges, dtype=float)
    if edges.ndim != 1 or len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise ConfigError("histogram edges must be strictly increasing")
    nb = len(edges) - 1
    idx = np.searchsorted(edges, x, side="right") - 1
    idx[x == edges[-1]] = nb - 1
    clamped = int(np.count_nonzero((idx < 0) | (idx >= nb)))
    counts = np.bincount(np.clip(idx, 0, nb - 1), minlength=nb).astype(float)
    return IncrementPDF(edges.copy(), counts / x.size, int(x.size), clamped)


def divergence_error(p_env: IncrementPDF, p_hive: IncrementPDF) -> float:
    if p_env.edges.shape != p_hive.edges.shape or not np.array_equal(p_env.edges, p_hive.edges):
        raise BinMismatch("PDFs use different bin edges")
    return float(np.abs(p_env.probabilities - p_hive.probabilities).sum() ** 2)


@dataclass(frozen=True, eq=False)
class ErrorCurve:
    t: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    n_windows: np.ndarray
    utc_offset: int = 0


@dataclass(frozen=True, eq=False)
class OnsetResult:
    onset: int | None
    error: ErrorCurve
    env_stats: RollingStats
    hive_stats: RollingStats


def _suffix_error(stats_e: RollingStats, stats_h: RollingStats, times: np.ndarray,
                  edges: np.ndarray, min_suffix: int) -> np.ndarray:
    de, dh = np.diff(stats_e.std), np.diff(stats_h.std)
    t_inc = stats_e.t_center[1:]
    out = np.full(len(times), np.nan)
    for k, t in enumerate(times):
        sel = t_inc >= t
        if np.count_nonzero(sel) < min_suffix:
            continue
        out[k] = divergence_error(increment_pdf(de[sel], edges), increment_pdf(dh[sel], edges))
    return out


def error_curve(
    env: TemperatureSeries,
    hive: TemperatureSeries,
    windows: Sequence[float] = ERROR_WINDOWS,
    step: int = DEFAULT_STEP,
    edges: Sequence[float] | None = None,
    min_suffix: int = MIN_SUFFIX,
) -> ErrorCurve:
    """Error between suffix increment PDFs, averaged over window lengths.

    At each time ``t`` the PDFs use every increment from ``t`` to the end
    of the record. The standard error is across window lengths.
    """
    edges = DEFAULT_EDGES if edges is None else np.asarray(edges, dtype=float)
    per_window = []
    times = None
    for w in sorted(windows):
        se, sh = rolling_mean_std(env, w, step), rolling_mean_std(hive, w, step)
        if times is None:
            times = se.t_center
        per_window.append(_suffix_error(se, sh, times, edges, min_suffix))
    errs = np.vstack(per_window)
    n = np.count_nonzero(~np.isnan(errs), axis=0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        mean = np.nanmean(errs, axis=0)
        sd = np.nanstd(errs, axis=0, ddof=1)
    stderr = np.where(n > 1, sd / np.sqrt(np.maximum(n, 1)), np.nan)
    keep = n > 0
    return ErrorCurve(times[keep], mean[keep], stderr[keep], n[keep], env.utc_offset)


def _suffix_corr(a: np.ndarray, b: np.ndarray, min_suffix: int) -> np.ndarray:
    """Pearson correlation of ``a[k:]`` with ``b[k:]`` for every ``k``."""
    n = len(a)
    out = np.full(n, np.nan)
    for k in range(n - min_suffix + 1):
        x, y = a[k:], b[k:]
        if np.ptp(x) == 0 or np.ptp(y) == 0:
            continue
        out[k] = np.corrcoef(x, y)[0, 1]
    return out


def collapse_onset_statistical(
    env: TemperatureSeries,
    hive: TemperatureSeries,
    optimal: tuple[float, float] = OPTIMAL_BAND,
    windows: Sequence[float] = ERROR_WINDOWS,
    onset_window: float = 7.0,
    step: int = DEFAULT_STEP,
    corr_threshold: float = CORR_THRESHOLD,
    min_suffix: int = MIN_SUFFIX,
    edges: Sequence[float] | None = None,
    max_gap: int = DEFAULT_MAX_GAP,
) -> OnsetResult:
    """Earliest window centre from which the hive has lost regulation.

    Both must hold from that centre to the end of the record: the rolling
    hive mean stays outside ``optimal``, and the rolling hive standard
    deviation correlates with the environmental one at ``corr_threshold``
    or more.
    """
    env, hive = align(env, hive, max_gap)
    se = rolling_mean_std(env, onset_window, step)
    sh = rolling_mean_std(hive, onset_window, step)
    outside = (sh.mean < optimal[0]) | (sh.mean > optimal[1])
    all_after = np.flip(np.logical_and.accumulate(np.flip(outside)))
    corr = _suffix_corr(sh.std, se.std, min_suffix)
    ok = all_after & (np.nan_to_num(corr, nan=-1.0) >= corr_threshold)
    hits = np.flatnonzero(ok)
    onset = int(sh.t_center[hits[0]]) if hits.size else None
    curve = error_curve(env, hive, windows, step, edges, min_suffix)
    return OnsetResult(onset, curve, se, sh)


# -- outputs -------------------------------------------------------------------

def rolling_stats_csv(stats: dict[str, RollingStats]) -> str:
    lines = ["t_center,series,window_days,mean,std"]
    for name in stats:
        s = stats[name]
        for t, m, sd in zip(s.t_center, s.mean, s.std):
            lines.append(f"{format_instant(int(t), s.utc_offset)},{name},{s.window:g},{m:.6f},{sd:.6f}")
    return "\n".join(lines) + "\n"


def error_curve_csv(curve: ErrorCurve) -> str:
    lines = ["t,error_mean,error_stderr,n_windows"]
    for t, m, se, n in zip(curve.t, curve.mean, curve.stderr, curve.n_windows):
        se_txt = "" if np.isnan(se) else f"{se:.6f}"
        lines.append(f"{format_instant(int(t), curve.utc_offset)},{m:.6f},{se_txt},{int(n)}")
    return "\n".join(lines) + "\n"
