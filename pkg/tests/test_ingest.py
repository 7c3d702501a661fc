import io
import json
from datetime import date

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import AEDT, T0, make_series
from hivetemp.errors import (
    ConfigError,
    DataError,
    EmptyInput,
    IntervalMismatch,
    IrregularGrid,
    MalformedRow,
    NonMonotonicAfterSort,
    NoOverlap,
)
from hivetemp.ingest import (
    Hemisphere,
    HiveDataset,
    Season,
    align,
    align_detailed,
    format_instant,
    load_dataset,
    load_manifest,
    parse_instant,
    parse_series,
    season_at,
    season_of,
    serialize_series,
    to_minutes,
    write_manifest,
    write_series,
)

CSV = """timestamp,temp_c
2020-01-22T00:00:00+11:00,20.5
2020-01-22T00:15:00+11:00,20.5625
2020-01-22T00:30:00+11:00,21.0
"""


def test_parse_basic():
    s = parse_series(CSV, "env", "environment")
    assert s.interval == 15
    assert s.start == T0
    assert s.utc_offset == AEDT
    assert list(s.temps) == [20.5, 20.5625, 21.0]


def test_parse_stream_and_sorting():
    rows = CSV.strip().splitlines()
    shuffled = "\n".join([rows[0], rows[3], rows[1], rows[2]])
    s = parse_series(io.StringIO(shuffled), "env", "environment")
    assert list(s.temps) == [20.5, 20.5625, 21.0]


def test_parse_z_suffix():
    s = parse_series("timestamp,temp_c\n2020-01-01T00:00:00Z,1\n2020-01-01T00:15:00Z,2\n", "e", "environment")
    assert s.utc_offset == 0


@pytest.mark.parametrize("text, line", [
    ("time,temp\n", 1),
    ("timestamp,temp_c\n2020-01-22T00:00:00+11:00,abc\n", 2),
    ("timestamp,temp_c\n2020-01-22T00:00:00+11:00,20\n2020-01-22T00:15:00,20\n", 3),
    ("timestamp,temp_c\n2020-01-22T00:00:00+11:00,20,1\n", 2),
    ("timestamp,temp_c\n2020-01-22T00:00:00+11:00,95.0\n", 2),
    ("timestamp,temp_c\n2020-01-22T00:00:00+11:00,nan\n", 2),
])
def test_malformed_rows_report_line(text, line):
    with pytest.raises(MalformedRow) as exc:
        parse_series(text, "x", "hive")
    assert exc.value.line == line


def test_empty_and_header_only():
    with pytest.raises(EmptyInput):
        parse_series("", "x", "hive")
    with pytest.raises(EmptyInput):
        parse_series("timestamp,temp_c\n", "x", "hive")


def test_duplicate_timestamp():
    text = CSV + "2020-01-22T00:15:00+11:00,22\n"
    with pytest.raises(NonMonotonicAfterSort):
        parse_series(text, "x", "hive")


def test_interval_is_modal_gap_and_gaps_must_fit():
    text = "timestamp,temp_c\n" + "\n".join(
        f"{format_instant(T0 + k, AEDT)},20" for k in (0, 15, 30, 45, 90)
    )
    assert parse_series(text, "x", "hive").interval == 15
    bad = "timestamp,temp_c\n" + "\n".join(
        f"{format_instant(T0 + k, AEDT)},20" for k in (0, 15, 30, 40)
    )
    with pytest.raises(IrregularGrid):
        parse_series(bad, "x", "hive")


def test_series_is_read_only():
    s = make_series([1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        s.temps[0] = 5.0


temps_st = st.lists(
    st.floats(min_value=-40, max_value=80, allow_nan=False).map(lambda v: round(v * 16) / 16),
    min_size=2, max_size=60,
)


@settings(max_examples=60, deadline=None)
@given(temps_st, st.sampled_from([1, 5, 15, 30]), st.sampled_from([-300, 0, 60, 600, 660]))
def test_serialize_round_trip(temps, interval, offset):
    s = make_series(temps, interval=interval, offset=offset)
    back = parse_series(serialize_series(s), s.sensor_id, s.kind)
    assert back == s


def test_file_round_trip(tmp_path):
    s = make_series([20.0, 20.25, 21.5], kind="environment")
    p = tmp_path / "env.csv"
    write_series(s, p)
    before = p.read_bytes()
    assert parse_series(p.read_text(), "env", "environment") == s
    assert p.read_bytes() == before


def test_align_interpolates_short_gaps_and_splits_long_ones():
    env = make_series(np.arange(20, dtype=float), kind="environment")
    keep = [k for k in range(20) if k not in (3, 10, 11, 12, 13, 14)]
    hive = make_series(np.arange(20, dtype=float)[keep], times=T0 + 15 * np.array(keep))
    r = align_detailed(env, hive, max_gap=60)
    # k=3 sits in a 30-min gap -> filled; 10..14 sit in a 90-min gap -> dropped
    assert list(r.hive.times) == list(T0 + 15 * np.array([k for k in range(20) if not 10 <= k <= 14]))
    assert r.hive.temps[3] == pytest.approx(3.0)
    assert r.n_interpolated == 1
    assert r.n_splits == 1
    assert r.hive.segments() == [(0, 10), (10, 15)]  # index ranges, end exclusive


def test_align_intersection_and_errors():
    env = make_series(np.zeros(10), kind="environment")
    hive = make_series(np.ones(10), start=T0 + 60)
    e, h = align(env, hive)
    assert e.start == h.start == T0 + 60
    assert e.end == h.end == T0 + 135
    with pytest.raises(NoOverlap):
        align(env, make_series(np.ones(3), start=T0 + 10_000))
    with pytest.raises(IntervalMismatch):
        align(env, make_series(np.ones(3), interval=30))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.booleans(), min_size=8, max_size=80), st.integers(0, 5))
def test_align_idempotent(mask, shift):
    n = len(mask)
    idx = np.array([k for k in range(n) if mask[k] or k == 0])
    env = make_series(np.sin(np.arange(n + shift)), kind="environment")
    hive = make_series(np.cos(idx), times=T0 + 15 * (idx + shift))
    e1, h1 = align(env, hive)
    e2, h2 = align(e1, h1)
    assert e1 == e2 and h1 == h2
    assert np.array_equal(e1.times, h1.times)


def test_dataset_checks_kinds_and_intervals():
    env = make_series([1.0, 2.0], kind="environment")
    with pytest.raises(DataError):
        HiveDataset(env, {"a": make_series([1.0, 2.0], kind="environment")}, "south")
    with pytest.raises(IntervalMismatch):
        HiveDataset(env, {"a": make_series([1.0, 2.0], interval=30)}, "south")


@pytest.mark.parametrize("month, south, north", [
    (1, Season.SUMMER, Season.WINTER),
    (4, Season.AUTUMN, Season.SPRING),
    (7, Season.WINTER, Season.SUMMER),
    (10, Season.SPRING, Season.AUTUMN),
    (12, Season.SUMMER, Season.WINTER),
    (6, Season.WINTER, Season.SUMMER),
    (3, Season.AUTUMN, Season.SPRING),
])
def test_seasons(month, south, north):
    d = date(2020, month, 15)
    assert season_of(d, Hemisphere.SOUTH) is south
    assert season_of(d, "north") is north


def test_season_uses_local_date():
    # 2020-05-31T14:30Z is already 1 June (winter) in UTC+10
    t = to_minutes(parse_instant("2020-05-31T14:30:00+00:00"))
    assert season_at(t, 0, "south") is Season.AUTUMN
    assert season_at(t, 600, "south") is Season.WINTER


def test_manifest_round_trip(tmp_path):
    write_series(make_series([20.0, 21.0, 22.0], kind="environment"), tmp_path / "env.csv")
    write_series(make_series([34.0, 34.1, 34.2]), tmp_path / "h.csv")
    write_manifest(tmp_path / "m.json", "env.csv", {"a": "h.csv"}, "north", "demo",
                   {"a": "collapsed"}, {"a": "2020-01-22T00:15:00+11:00"})
    m = load_manifest(tmp_path / "m.json")
    assert m.hemisphere is Hemisphere.NORTH
    assert m.collapse_onsets == {"a": "2020-01-22T00:15:00+11:00"}
    ds = load_dataset(m)
    assert list(ds.hives) == ["a"] and ds.hive_labels == {"a": "collapsed"}


def test_manifest_errors(tmp_path):
    with pytest.raises(DataError):
        load_manifest(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ConfigError):
        load_manifest(tmp_path / "bad.json")
    (tmp_path / "m.json").write_text(json.dumps({"env": "env.csv", "hives": {"a": "nope.csv"}}))
    with pytest.raises(DataError):
        load_dataset(tmp_path / "m.json")
    (tmp_path / "l.json").write_text(json.dumps({"env": "e", "hives": {}, "hive_labels": {"a": "sick"}}))
    with pytest.raises(ConfigError):
        load_manifest(tmp_path / "l.json")
