import numpy as np
import pytest

from hivetemp.ingest import SensorKind, TemperatureSeries

T0 = 26_326_860  # 2020-01-22T00:00+11:00 in minutes since the epoch
AEDT = 660


def make_series(temps, kind="hive", interval=15, start=T0, offset=AEDT, sensor_id=None, times=None):
    temps = np.asarray(temps, dtype=float)
    if times is None:
        times = start + interval * np.arange(len(temps), dtype=np.int64)
    kind = SensorKind(kind)
    sid = sensor_id or ("env" if kind is SensorKind.ENVIRONMENT else "hive")
    return TemperatureSeries(sid, kind, interval, np.asarray(times, dtype=np.int64), temps, offset)


@pytest.fixture
def series_factory():
    return make_series


# Acceptance criteria report: one pass/fail line per criterion.
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
