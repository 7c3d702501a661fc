"""Sensor CSV ingestion, grid alignment and calendar seasons.

Timestamps are held as integer minutes since the Unix epoch (UTC) together
with one fixed UTC offset per series; local wall-clock time is only needed
for the daily-extreme windows and for season assignment.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, TextIO

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    EmptyInput,
    IntervalMismatch,
    IrregularGrid,
    MalformedRow,
    NoOverlap,
    NonMonotonicAfterSort,
)

CSV_HEADER = "timestamp,temp_c"
TEMP_MIN = -40.0
TEMP_MAX = 80.0
DEFAULT_MAX_GAP = 60

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


class SensorKind(str, Enum):
    ENVIRONMENT = "environment"
    HIVE = "hive"


class Hemisphere(str, Enum):
    NORTH = "north"
    SOUTH = "south"


class Season(str, Enum):
    SUMMER = "summer"
    AUTUMN = "autumn"
    WINTER = "winter"
    SPRING = "spring"


# Southern Hemisphere, indexed by month - 1.
_SOUTH_SEASONS = (
    Season.SUMMER, Season.SUMMER,
    Season.AUTUMN, Season.AUTUMN, Season.AUTUMN,
    Season.WINTER, Season.WINTER, Season.WINTER,
    Season.SPRING, Season.SPRING, Season.SPRING,
    Season.SUMMER,
)


def to_minutes(t: datetime) -> int:
    """Minutes since the epoch for an offset-aware datetime (seconds rounded)."""
    if t.tzinfo is None or t.utcoffset() is None:
        raise ValueError("timestamp must carry a UTC offset")
    return int(round((t - _EPOCH).total_seconds() / 60.0))


def from_minutes(minutes: int, utc_offset: int = 0) -> datetime:
    tz = timezone(timedelta(minutes=utc_offset))
    return (_EPOCH + timedelta(minutes=int(minutes))).astimezone(tz)


def format_instant(minutes: int, utc_offset: int = 0) -> str:
    return from_minutes(minutes, utc_offset).isoformat()


def parse_instant(text: str) -> datetime:
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    t = datetime.fromisoformat(text)
    if t.tzinfo is None:
        raise ValueError(f"timestamp {text!r} has no UTC offset")
    return t


def local_date(minutes: int, utc_offset: int) -> date:
    return from_minutes(minutes, utc_offset).date()


@dataclass(frozen=True)
class Reading:
    timestamp: datetime
    temp: float

    def __post_init__(self):
        if self.timestamp.tzinfo is None:
            raise ValueError("Reading timestamp must be offset-aware")
        if not np.isfinite(self.temp) or not TEMP_MIN <= self.temp <= TEMP_MAX:
            raise ValueError(f"temperature {self.temp} outside [{TEMP_MIN}, {TEMP_MAX}]")


@dataclass(frozen=True, eq=False)
class TemperatureSeries:
    """Uniformly sampled readings from one sensor.

    ``times`` are minutes since the epoch (UTC); ``utc_offset`` is the fixed
    offset, in minutes, used to render local time. Gaps between consecutive
    samples are whole multiples of ``interval``.
    """

    sensor_id: str
    kind: SensorKind
    interval: int
    times: np.ndarray
    temps: np.ndarray
    utc_offset: int = 0

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.int64).copy()
        temps = np.asarray(self.temps, dtype=np.float64).copy()
        if times.shape != temps.shape or times.ndim != 1:
            raise ValueError("times and temps must be 1-D arrays of equal length")
        if self.interval <= 0:
            raise ValueError("interval must be positive")
        if len(times) > 1:
            gaps = np.diff(times)
            if np.any(gaps <= 0):
                raise NonMonotonicAfterSort("timestamps must be strictly increasing")
            if np.any(gaps % self.interval):
                raise IrregularGrid(
                    f"gaps in {self.sensor_id!r} are not multiples of {self.interval} min"
                )
        if not np.all(np.isfinite(temps)):
            raise DataError(f"non-finite temperature in {self.sensor_id!r}")
        times.setflags(write=False)
        temps.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "temps", temps)
        object.__setattr__(self, "kind", SensorKind(self.kind))

    def __len__(self) -> int:
        return len(self.times)

    def __eq__(self, other):
        if not isinstance(other, TemperatureSeries):
            return NotImplemented
        return (
            self.sensor_id == other.sensor_id
            and self.kind == other.kind
            and self.interval == other.interval
            and self.utc_offset == other.utc_offset
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.temps, other.temps)
        )

    __hash__ = None

    @property
    def readings(self) -> tuple[Reading, ...]:
        return tuple(
            Reading(from_minutes(t, self.utc_offset), float(v))
            for t, v in zip(self.times, self.temps)
        )

    @property
    def start(self) -> int:
        return int(self.times[0])

    @property
    def end(self) -> int:
        return int(self.times[-1])

    def replace(self, **changes) -> "TemperatureSeries":
        fields = dict(
            sensor_id=self.sensor_id, kind=self.kind, interval=self.interval,
            times=self.times, temps=self.temps, utc_offset=self.utc_offset,
        )
        fields.update(changes)
        return TemperatureSeries(**fields)

    def between(self, start: int, end: int) -> "TemperatureSeries":
        """Samples with ``start <= t < end`` (minutes since epoch)."""
        lo, hi = np.searchsorted(self.times, [start, end], side="left")
        return self.replace(times=self.times[lo:hi], temps=self.temps[lo:hi])

    def segments(self) -> list[tuple[int, int]]:
        """Index ranges ``[lo, hi)`` of gap-free runs."""
        if len(self) == 0:
            return []
        breaks = np.flatnonzero(np.diff(self.times) != self.interval) + 1
        edges = np.concatenate(([0], breaks, [len(self)]))
        return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


@dataclass(frozen=True)
class HiveDataset:
    env: TemperatureSeries
    hives: Mapping[str, TemperatureSeries]
    hemisphere: Hemisphere = Hemisphere.SOUTH
    label: str = ""
    hive_labels: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.env.kind is not SensorKind.ENVIRONMENT:
            raise DataError("env series must be of kind environment")
        for hive_id, s in self.hives.items():
            if s.kind is not SensorKind.HIVE:
                raise DataError(f"hive series {hive_id!r} must be of kind hive")
            if s.interval != self.env.interval:
                raise IntervalMismatch(
                    f"hive {hive_id!r} interval {s.interval} != env interval {self.env.interval}"
                )
        object.__setattr__(self, "hemisphere", Hemisphere(self.hemisphere))
        object.__setattr__(self, "hives", dict(self.hives))

    @property
    def interval(self) -> int:
        return self.env.interval


def _modal_gap(times: np.ndarray) -> int:
    gaps = np.diff(times)
    counts = Counter(int(g) for g in gaps)
    best = max(counts.values())
    return min(g for g, c in counts.items() if c == best)


def parse_series(
    text: str | TextIO,
    sensor_id: str,
    kind: SensorKind | str,
    interval: int | None = None,
) -> TemperatureSeries:
    """Parse a ``timestamp,temp_c`` CSV into a :class:`TemperatureSeries`.

    The sampling interval is the modal gap between sorted timestamps unless
    given explicitly. Line numbers in errors count the header as line 1.
    """
    if not isinstance(text, str):
        text = text.read()
    lines = text.lstrip("﻿").splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise EmptyInput(f"{sensor_id}: no content")
    if lines[0].strip().replace(" ", "").lower() != CSV_HEADER:
        raise MalformedRow(1, f"expected header {CSV_HEADER!r}")

    times, temps = [], []
    offset = None
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise MalformedRow(lineno, "expected two columns")
        try:
            t = parse_instant(parts[0])
            v = float(parts[1])
        except ValueError as exc:
            raise MalformedRow(lineno, str(exc)) from None
        if not np.isfinite(v) or not TEMP_MIN <= v <= TEMP_MAX:
            raise MalformedRow(lineno, f"temperature {v} outside sensor range")
        if offset is None:
            offset = int(t.utcoffset().total_seconds() // 60)
        times.append(to_minutes(t))
        temps.append(v)
    if not times:
        raise EmptyInput(f"{sensor_id}: header only")

    t_arr = np.array(times, dtype=np.int64)
    v_arr = np.array(temps, dtype=np.float64)
    order = np.argsort(t_arr, kind="stable")
    t_arr, v_arr = t_arr[order], v_arr[order]
    dup = np.flatnonzero(np.diff(t_arr) == 0)
    if dup.size:
        raise NonMonotonicAfterSort(
            f"{sensor_id}: duplicate timestamp {format_instant(t_arr[dup[0]], offset)}"
        )
    if interval is None:
        if len(t_arr) < 2:
            raise DataError(f"{sensor_id}: cannot infer interval from a single reading")
        interval = _modal_gap(t_arr)
    return TemperatureSeries(sensor_id, SensorKind(kind), int(interval), t_arr, v_arr, offset)


def serialize_series(series: TemperatureSeries) -> str:
    out = [CSV_HEADER]
    for t, v in zip(series.times, series.temps):
        out.append(f"{format_instant(t, series.utc_offset)},{float(v)!r}")
    return "\n".join(out) + "\n"


def read_series(path: str | Path, sensor_id: str, kind: SensorKind | str) -> TemperatureSeries:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    return parse_series(text, sensor_id, kind)


def write_series(series: TemperatureSeries, path: str | Path) -> None:
    Path(path).write_text(serialize_series(series), encoding="utf-8", newline="\n")


def _fill(series: TemperatureSeries, grid: np.ndarray, max_gap: int) -> tuple[np.ndarray, int]:
    """Values of ``series`` on ``grid``; NaN where a gap exceeds ``max_gap``."""
    times, temps = series.times, series.temps
    idx = np.searchsorted(times, grid)
    idx_c = np.clip(idx, 0, len(times) - 1)
    exact = times[idx_c] == grid
    out = np.full(len(grid), np.nan)
    out[exact] = temps[idx_c[exact]]
    missing = ~exact & (idx > 0) & (idx < len(times))
    if np.any(missing):
        prev = times[idx[missing] - 1]
        nxt = times[idx[missing]]
        ok = (nxt - prev) <= max_gap
        interp = np.interp(grid[missing], times, temps)
        vals = np.where(ok, interp, np.nan)
        out[missing] = vals
        n_interp = int(ok.sum())
    else:
        n_interp = 0
    return out, n_interp


@dataclass(frozen=True)
class AlignResult:
    env: TemperatureSeries
    hive: TemperatureSeries
    n_interpolated: int
    n_splits: int
    max_gap: int


def align_detailed(
    env: TemperatureSeries, hive: TemperatureSeries, max_gap: int = DEFAULT_MAX_GAP
) -> AlignResult:
    if len(env) == 0 or len(hive) == 0:
        raise NoOverlap("cannot align an empty series")
    if env.interval != hive.interval:
        raise IntervalMismatch(f"intervals differ: {env.interval} vs {hive.interval}")
    step = env.interval
    lo, hi = max(env.start, hive.start), min(env.end, hive.end)
    if lo > hi or (env.start - hive.start) % step:
        raise NoOverlap(f"{env.sensor_id} and {hive.sensor_id} share no timestamps")
    grid = np.arange(lo, hi + 1, step, dtype=np.int64)
    e, n_e = _fill(env, grid, max_gap)
    h, n_h = _fill(hive, grid, max_gap)
    keep = np.isfinite(e) & np.isfinite(h)
    if not keep.any():
        raise NoOverlap(f"{env.sensor_id} and {hive.sensor_id} share no timestamps")
    t = grid[keep]
    n_splits = int(np.count_nonzero(np.diff(t) != step))
    return AlignResult(
        env.replace(times=t, temps=e[keep]),
        hive.replace(times=t, temps=h[keep]),
        n_e + n_h,
        n_splits,
        max_gap,
    )


def align(
    env: TemperatureSeries, hive: TemperatureSeries, max_gap: int = DEFAULT_MAX_GAP
) -> tuple[TemperatureSeries, TemperatureSeries]:
    """Put two series on their common timestamp grid.

    Interior gaps of at most ``max_gap`` minutes are linearly interpolated;
    longer gaps are left in place and split the record for later analysis.
    """
    r = align_detailed(env, hive, max_gap)
    return r.env, r.hive


def season_of(t: datetime | date, hemisphere: Hemisphere | str) -> Season:
    season = _SOUTH_SEASONS[t.month - 1]
    if Hemisphere(hemisphere) is Hemisphere.NORTH:
        season = _SOUTH_SEASONS[(t.month + 5) % 12]
    return season


def season_at(minutes: int, utc_offset: int, hemisphere: Hemisphere | str) -> Season:
    return season_of(from_minutes(minutes, utc_offset), hemisphere)


# -- dataset manifests -------------------------------------------------------

@dataclass(frozen=True)
class Manifest:
    path: Path
    label: str
    hemisphere: Hemisphere
    env: Path
    hives: dict[str, Path]
    hive_labels: dict[str, str]
    collapse_onsets: dict[str, str]


def load_manifest(path: str | Path) -> Manifest:
    """Read a JSON dataset manifest.

    Keys: ``env`` (CSV path), ``hives`` (hive id -> CSV path), ``hemisphere``
    (``north``/``south``), optional ``label``, ``hive_labels`` (hive id ->
    ``healthy``/``collapsed``) and ``collapse_onsets`` (hive id -> ISO time).
    Relative paths resolve against the manifest's directory.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataError(f"manifest {path} not found") from None
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read manifest {path}: {exc}") from None
    if not isinstance(raw, dict) or "env" not in raw or not isinstance(raw.get("hives"), dict):
        raise ConfigError(f"manifest {path} needs 'env' and a 'hives' mapping")
    try:
        hemisphere = Hemisphere(str(raw.get("hemisphere", "south")).lower())
    except ValueError:
        raise ConfigError(f"bad hemisphere {raw.get('hemisphere')!r}") from None
    base = path.parent
    labels = {str(k): str(v) for k, v in raw.get("hive_labels", {}).items()}
    for k, v in labels.items():
        if v not in ("healthy", "collapsed"):
            raise ConfigError(f"hive label for {k!r} must be healthy or collapsed, got {v!r}")
    return Manifest(
        path=path,
        label=str(raw.get("label", path.stem)),
        hemisphere=hemisphere,
        env=base / raw["env"],
        hives={str(k): base / v for k, v in raw["hives"].items()},
        hive_labels=labels,
        collapse_onsets={str(k): str(v) for k, v in raw.get("collapse_onsets", {}).items()},
    )


def load_dataset(manifest: Manifest | str | Path) -> HiveDataset:
    if not isinstance(manifest, Manifest):
        manifest = load_manifest(manifest)
    env = read_series(manifest.env, "env", SensorKind.ENVIRONMENT)
    hives = {
        hive_id: read_series(p, hive_id, SensorKind.HIVE)
        for hive_id, p in manifest.hives.items()
    }
    return HiveDataset(env, hives, manifest.hemisphere, manifest.label, manifest.hive_labels)


def write_manifest(
    path: str | Path,
    env: str,
    hives: Mapping[str, str],
    hemisphere: Hemisphere | str,
    label: str,
    hive_labels: Mapping[str, str] | None = None,
    collapse_onsets: Mapping[str, str] | None = None,
) -> None:
    doc = {
        "label": label,
        "hemisphere": Hemisphere(hemisphere).value,
        "env": env,
        "hives": dict(hives),
    }
    if hive_labels:
        doc["hive_labels"] = dict(hive_labels)
    if collapse_onsets:
        doc["collapse_onsets"] = dict(collapse_onsets)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def series_from_readings(
    readings: Iterable[Reading], sensor_id: str, kind: SensorKind | str, interval: int
) -> TemperatureSeries:
    readings = list(readings)
    if not readings:
        raise EmptyInput(sensor_id)
    offset = int(readings[0].timestamp.utcoffset().total_seconds() // 60)
    return TemperatureSeries(
        sensor_id, SensorKind(kind), interval,
        np.array([to_minutes(r.timestamp) for r in readings], dtype=np.int64),
        np.array([r.temp for r in readings]),
        offset,
    )
