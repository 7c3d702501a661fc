"""(pi, delta_t) grid summaries over many hives.

Cells are half-open ``[lo, lo + 0.5)`` on both axes except the last cell of
each axis, which also takes the upper range edge. Points outside the range
are tallied as clamped against their edge cell instead of being counted in
it, so ``sum(cell counts) + clamped + skipped == number of estimates``.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, NamedTuple, Sequence

from .classify import StatusThresholds
from .errors import ConfigError, MissingOnset
from .estimators import PI_CAP, WindowEstimate
from .ingest import Hemisphere, Season, season_at

CELL = 0.5
HEALTHY = "healthy"
COLLAPSED = "collapsed"
SEASON_ORDER = (Season.SUMMER, Season.AUTUMN, Season.WINTER, Season.SPRING)


@dataclass(frozen=True)
class GridSpec:
    pi_range: tuple[float, float] = (0.0, PI_CAP)
    delta_t_range: tuple[float, float] = (-5.0, 20.0)
    cell: float = CELL

    def __post_init__(self):
        if self.cell != CELL:
            raise ConfigError("grid cells are fixed at 0.5 x 0.5")
        for lo, hi in (self.pi_range, self.delta_t_range):
            if hi <= lo:
                raise ConfigError("grid ranges must be increasing")
            for v in (lo, hi):
                if not math.isclose(v / CELL, round(v / CELL), abs_tol=1e-12):
                    raise ConfigError(f"grid edge {v} is not a multiple of {CELL}")

    @property
    def shape(self) -> tuple[int, int]:
        return (int(round((self.pi_range[1] - self.pi_range[0]) / CELL)),
                int(round((self.delta_t_range[1] - self.delta_t_range[0]) / CELL)))


class CellIndex(NamedTuple):
    i: int
    j: int
    clamped: bool


def _axis(v: float, lo: float, hi: float, n: int) -> tuple[int, bool]:
    if v < lo:
        return 0, True
    if v > hi:
        return n - 1, True
    return min(int(math.floor((v - lo) / CELL)), n - 1), False


def bin(pi: float, delta_t: float, spec: GridSpec = GridSpec()) -> CellIndex:
    ni, nj = spec.shape
    i, ci = _axis(pi, *spec.pi_range, ni)
    j, cj = _axis(delta_t, *spec.delta_t_range, nj)
    return CellIndex(i, j, ci or cj)


@dataclass
class GridCell:
    index: tuple[int, int]
    counts: Counter = field(default_factory=Counter)  # (hive_id, season, class) -> n
    days_to_collapse: list[float] = field(default_factory=list)

    @property
    def n_total(self) -> int:
        return sum(self.counts.values())

    @property
    def n_collapsed(self) -> int:
        return sum(n for (_, _, cls), n in self.counts.items() if cls == COLLAPSED)

    @property
    def prop_collapsed(self) -> float:
        return self.n_collapsed / self.n_total if self.n_total else 0.0

    def season_freq(self) -> dict[Season, float]:
        tally = Counter()
        for (_, season, _), n in self.counts.items():
            tally[season] += n
        total = sum(tally.values())
        return {s: tally[s] / total for s in SEASON_ORDER if tally[s]}

    @property
    def dominant_season(self) -> tuple[Season, float] | None:
        freq = self.season_freq()
        if not freq:
            return None
        best = max(freq.values())
        season = next(s for s in SEASON_ORDER if freq.get(s) == best)
        return season, best

    @property
    def mean_days_to_collapse(self) -> float | None:
        if not self.days_to_collapse:
            return None
        return sum(self.days_to_collapse) / len(self.days_to_collapse)


@dataclass
class GridSummary:
    spec: GridSpec
    cells: dict[tuple[int, int], GridCell] = field(default_factory=dict)
    n_clamped: int = 0
    n_skipped: int = 0
    clamped_cells: Counter = field(default_factory=Counter)

    @property
    def n_binned(self) -> int:
        return sum(c.n_total for c in self.cells.values())

    def merge(self, other: "GridSummary") -> "GridSummary":
        if other.spec != self.spec:
            raise ConfigError("cannot merge grids with different specs")
        out = GridSummary(self.spec, n_clamped=self.n_clamped + other.n_clamped,
                          n_skipped=self.n_skipped + other.n_skipped,
                          clamped_cells=self.clamped_cells + other.clamped_cells)
        for idx in sorted(set(self.cells) | set(other.cells)):
            cell = GridCell(idx)
            for src in (self.cells.get(idx), other.cells.get(idx)):
                if src is not None:
                    cell.counts.update(src.counts)
                    cell.days_to_collapse.extend(src.days_to_collapse)
            cell.days_to_collapse.sort()
            out.cells[idx] = cell
        return out


def _label(labels: Mapping[str, str], hive_id: str) -> str:
    try:
        cls = labels[hive_id]
    except KeyError:
        raise ConfigError(f"no health label for hive {hive_id!r}") from None
    if cls not in (HEALTHY, COLLAPSED):
        raise ConfigError(f"label for {hive_id!r} must be {HEALTHY!r} or {COLLAPSED!r}")
    return cls


def accumulate(
    estimates: Mapping[str, Sequence[WindowEstimate]],
    labels: Mapping[str, str],
    collapse_onsets: Mapping[str, int],
    spec: GridSpec = GridSpec(),
    hemisphere: Hemisphere | str = Hemisphere.SOUTH,
) -> GridSummary:
    """Bin every estimate with both ``pi`` and ``delta_t`` into the grid.

    Collapsed-hive points also record ``(onset - t_center)`` in days.
    """
    total = GridSummary(spec)
    for hive_id in sorted(estimates):
        cls = _label(labels, hive_id)
        onset = None
        if cls == COLLAPSED:
            if collapse_onsets.get(hive_id) is None:
                raise MissingOnset(hive_id)
            onset = collapse_onsets[hive_id]
        part = GridSummary(spec)
        for est in estimates[hive_id]:
            if est.pi is None or est.delta_t is None:
                part.n_skipped += 1
                continue
            i, j, clamped = bin(est.pi, est.delta_t, spec)
            if clamped:
                part.n_clamped += 1
                part.clamped_cells[(i, j)] += 1
                continue
            cell = part.cells.setdefault((i, j), GridCell((i, j)))
            season = season_at(est.t_center, est.utc_offset, hemisphere)
            cell.counts[(hive_id, season, cls)] += 1
            if onset is not None:
                cell.days_to_collapse.append((onset - est.t_center) / 1440.0)
        total = total.merge(part)
    return total


class Zone(str, Enum):
    STABLE = "stable"
    WARNING = "warning"
    COLLAPSE = "collapse"


@dataclass(frozen=True)
class ZoneSummary:
    zone: Zone
    n_points: int
    n_healthy: int

    @property
    def healthy_ratio(self) -> float | None:
        return self.n_healthy / self.n_points if self.n_points else None


def zone_of(pi: float, th: StatusThresholds) -> Zone:
    if pi < th.pi_collapse:
        return Zone.COLLAPSE
    if pi < th.pi_warn:
        return Zone.WARNING
    return Zone.STABLE


def zone_summary(
    estimates: Mapping[str, Iterable[WindowEstimate]],
    labels: Mapping[str, str],
    thresholds: StatusThresholds = StatusThresholds(),
) -> list[ZoneSummary]:
    n = Counter()
    healthy = Counter()
    for hive_id, ests in estimates.items():
        cls = _label(labels, hive_id)
        for est in ests:
            if est.pi is None:
                continue
            z = zone_of(est.pi, thresholds)
            n[z] += 1
            healthy[z] += cls == HEALTHY
    return [ZoneSummary(z, n[z], healthy[z]) for z in (Zone.STABLE, Zone.WARNING, Zone.COLLAPSE)]


# -- outputs -------------------------------------------------------------------

GRID_FIELDS = ("i", "j", "pi_lo", "dt_lo", "n_total", "prop_collapsed", "dominant_season",
               "season_freq", "mean_days_to_collapse")


def _cell_row(spec: GridSpec, cell: GridCell) -> dict:
    i, j = cell.index
    dom = cell.dominant_season
    mean_days = cell.mean_days_to_collapse
    return {
        "i": i,
        "j": j,
        "pi_lo": spec.pi_range[0] + i * CELL,
        "dt_lo": spec.delta_t_range[0] + j * CELL,
        "n_total": cell.n_total,
        "prop_collapsed": round(cell.prop_collapsed, 6),
        "dominant_season": dom[0].value if dom else None,
        "season_freq": round(dom[1], 6) if dom else None,
        "mean_days_to_collapse": None if mean_days is None else round(mean_days, 6),
    }


def grid_to_csv(grid: GridSummary) -> str:
    lines = [",".join(GRID_FIELDS)]
    for idx in sorted(grid.cells):
        r = _cell_row(grid.spec, grid.cells[idx])
        lines.append(",".join((
            str(r["i"]), str(r["j"]), f"{r['pi_lo']:.1f}", f"{r['dt_lo']:.1f}", str(r["n_total"]),
            f"{r['prop_collapsed']:.6f}", r["dominant_season"] or "",
            "" if r["season_freq"] is None else f"{r['season_freq']:.6f}",
            "" if r["mean_days_to_collapse"] is None else f"{r['mean_days_to_collapse']:.6f}",
        )))
    return "\n".join(lines) + "\n"


def grid_document(grid: GridSummary, zones: Sequence[ZoneSummary] = ()) -> dict:
    cells = []
    for idx in sorted(grid.cells):
        row = _cell_row(grid.spec, grid.cells[idx])
        row["season_freqs"] = {s.value: round(f, 6) for s, f in grid.cells[idx].season_freq().items()}
        cells.append(row)
    return {
        "spec": {"pi_range": list(grid.spec.pi_range), "delta_t_range": list(grid.spec.delta_t_range),
                 "cell": CELL, "shape": list(grid.spec.shape)},
        "n_binned": grid.n_binned,
        "n_clamped": grid.n_clamped,
        "n_skipped": grid.n_skipped,
        "clamped_cells": [{"i": i, "j": j, "n": n} for (i, j), n in sorted(grid.clamped_cells.items())],
        "cells": cells,
        "zones": [zone_record(z) for z in zones],
    }


def zone_record(z: ZoneSummary) -> dict:
    ratio = z.healthy_ratio
    return {"zone": z.zone.value, "n_points": z.n_points, "n_healthy": z.n_healthy,
            "healthy_ratio": None if ratio is None else round(ratio, 6)}


def grid_json(grid: GridSummary, zones: Sequence[ZoneSummary] = ()) -> str:
    return json.dumps(grid_document(grid, zones), indent=2, sort_keys=True) + "\n"
