"""Stable / warning / collapsed status scale on top of window estimates."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .errors import ConfigError
from .estimators import WindowEstimate
from .ingest import Hemisphere, Season, format_instant, season_at

EPISODE_MERGE_GAP = 6 * 60  # minutes
DAY = 1440


class Status(str, Enum):
    STABLE = "stable"
    WARNING = "warning"
    COLLAPSED = "collapsed"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class StatusThresholds:
    pi_warn: float = 3.5
    delta_t_warn: float = 8.0
    pi_collapse: float = 1.5
    winter_pi_warn: float = 1.5
    confirm_days: float = 2.0
    warn_combinator: str = "any"

    def __post_init__(self):
        if not self.pi_collapse <= self.winter_pi_warn <= self.pi_warn:
            raise ConfigError("thresholds must satisfy pi_collapse <= winter_pi_warn <= pi_warn")
        if self.confirm_days < 1:
            raise ConfigError("confirm_days must be at least 1")
        if self.warn_combinator not in ("any", "all"):
            raise ConfigError("warn_combinator must be 'any' or 'all'")


@dataclass(frozen=True)
class StatusPoint:
    t: int
    status: Status
    estimate: WindowEstimate
    season: Season


@dataclass(frozen=True)
class WarningEpisode:
    start: int
    end: int
    n_flags: int

    @property
    def duration_days(self) -> float:
        return (self.end - self.start) / DAY

    @property
    def mean_flag_interval(self) -> float | None:
        """Minutes between flags; undefined for a single flag."""
        if self.n_flags < 2:
            return None
        return (self.end - self.start) / (self.n_flags - 1)


@dataclass(frozen=True)
class StatusTimeline:
    hive_id: str
    points: tuple[StatusPoint, ...]
    collapse_onset: int | None = None
    warning_episodes: tuple[WarningEpisode, ...] = field(default_factory=tuple)

    def counts(self) -> dict[str, int]:
        out = {s.value: 0 for s in Status}
        for p in self.points:
            out[p.status.value] += 1
        return out


def classify_point(est: WindowEstimate, season: Season, th: StatusThresholds = StatusThresholds()) -> Status:
    if est.pi is None:
        return Status.UNKNOWN
    if est.degenerate:
        # flat hive or slope under the floor: the perfectly regulated limit
        return Status.STABLE
    if est.pi < th.pi_collapse:
        return Status.COLLAPSED
    if Season(season) is Season.WINTER:
        return Status.WARNING if est.pi < th.winter_pi_warn else Status.STABLE
    low_pi = est.pi < th.pi_warn
    low_dt = est.delta_t is not None and est.delta_t < th.delta_t_warn
    flagged = (low_pi or low_dt) if th.warn_combinator == "any" else (low_pi and low_dt)
    return Status.WARNING if flagged else Status.STABLE


def confirm_collapse(points: Sequence[StatusPoint], confirm_days: float = 2.0) -> int | None:
    """Earliest time from which every classified point over the next
    ``confirm_days`` is Collapsed, with points covering that whole span.

    Unknown points neither confirm nor break a collapse.
    """
    span = int(round(confirm_days * DAY))
    classified = [p for p in points if p.status is not Status.UNKNOWN]
    n = len(classified)
    j = 0
    # next index at or after which a non-collapsed point occurs
    next_bad = [n] * (n + 1)
    for i in range(n - 1, -1, -1):
        next_bad[i] = i if classified[i].status is not Status.COLLAPSED else next_bad[i + 1]
    for i, p in enumerate(classified):
        if p.status is not Status.COLLAPSED:
            continue
        j = max(j, i)
        while j + 1 < n and classified[j + 1].t <= p.t + span:
            j += 1
        if next_bad[i] > j and classified[j].t - p.t >= span:
            return p.t
    return None


def warning_episodes(points: Sequence[StatusPoint], merge_gap: int = EPISODE_MERGE_GAP) -> list[WarningEpisode]:
    """Maximal runs of consecutive Warning points.

    Runs separated by less than ``merge_gap`` minutes are merged.
    """
    episodes: list[list[int]] = []
    in_run = False
    for p in points:
        if p.status is not Status.WARNING:
            in_run = False
            continue
        if episodes and (in_run or p.t - episodes[-1][1] < merge_gap):
            episodes[-1][1] = p.t
            episodes[-1][2] += 1
        else:
            episodes.append([p.t, p.t, 1])
        in_run = True
    return [WarningEpisode(a, b, n) for a, b, n in episodes]


def build_timeline(
    hive_id: str,
    estimates: Iterable[WindowEstimate],
    hemisphere: Hemisphere | str,
    th: StatusThresholds = StatusThresholds(),
) -> StatusTimeline:
    points = []
    for est in sorted(estimates, key=lambda e: e.t_center):
        season = season_at(est.t_center, est.utc_offset, hemisphere)
        points.append(StatusPoint(est.t_center, classify_point(est, season, th), est, season))
    return StatusTimeline(
        hive_id,
        tuple(points),
        confirm_collapse(points, th.confirm_days),
        tuple(warning_episodes(points)),
    )


def status_sequence(timeline: StatusTimeline) -> list[Status]:
    """Status changes in order, with repeats and Unknown removed.

    Collapse only counts once confirmed: points from the onset on are
    Collapsed, and unconfirmed Collapsed points before it count as Warning.
    """
    onset = timeline.collapse_onset
    seq: list[Status] = []
    for p in timeline.points:
        s = p.status
        if onset is not None and p.t >= onset:
            s = Status.COLLAPSED
        elif s is Status.COLLAPSED:
            s = Status.WARNING
        if s is Status.UNKNOWN:
            continue
        if not seq or seq[-1] is not s:
            seq.append(s)
    return seq


# -- outputs -------------------------------------------------------------------

TIMELINE_FIELDS = ("t", "hive_id", "status", "pi", "delta_t", "season")


def _fmt(v):
    return "" if v is None else f"{v:.6f}"


def timeline_to_csv(timelines: Iterable[StatusTimeline]) -> str:
    lines = [",".join(TIMELINE_FIELDS)]
    for tl in timelines:
        for p in tl.points:
            e = p.estimate
            lines.append(",".join((format_instant(p.t, e.utc_offset), tl.hive_id, p.status.value,
                                   _fmt(e.pi), _fmt(e.delta_t), p.season.value)))
    return "\n".join(lines) + "\n"


def timeline_summary(tl: StatusTimeline) -> dict:
    off = tl.points[0].estimate.utc_offset if tl.points else 0
    return {
        "hive_id": tl.hive_id,
        "n_points": len(tl.points),
        "counts": tl.counts(),
        "collapse_onset": None if tl.collapse_onset is None else format_instant(tl.collapse_onset, off),
        "warning_episodes": [
            {
                "start": format_instant(ep.start, off),
                "end": format_instant(ep.end, off),
                "duration_days": round(ep.duration_days, 6),
                "n_flags": ep.n_flags,
                "mean_flag_interval_min": None if ep.mean_flag_interval is None
                else round(ep.mean_flag_interval, 6),
            }
            for ep in tl.warning_episodes
        ],
    }


def timeline_summary_json(tl: StatusTimeline) -> str:
    return json.dumps(timeline_summary(tl), indent=2, sort_keys=True) + "\n"
