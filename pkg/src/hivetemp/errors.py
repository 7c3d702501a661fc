"""Exception hierarchy.

Two families matter to the CLI: :class:`ConfigError` (exit code 2) and
:class:`DataError` (exit code 3). Anything else is treated as internal.
"""


class HiveTempError(Exception):
    pass


class ConfigError(HiveTempError, ValueError):
    pass


class DataError(HiveTempError, ValueError):
    pass


# ingest
class EmptyInput(DataError):
    pass


class MalformedRow(DataError):
    def __init__(self, line: int, reason: str = ""):
        self.line = line
        msg = f"malformed row at line {line}"
        super().__init__(f"{msg}: {reason}" if reason else msg)


class NonMonotonicAfterSort(DataError):
    """Raised when two rows share a timestamp."""


class IrregularGrid(DataError):
    pass


class NoOverlap(DataError):
    pass


class IntervalMismatch(DataError):
    pass


# estimators
class NegativeSlope(DataError):
    pass


class DegenerateSlope(DataError):
    pass


class NoResponseSamples(DataError):
    pass


class InsufficientPairs(DataError):
    def __init__(self, n: int, n_min: int):
        self.n = n
        self.n_min = n_min
        super().__init__(f"{n} pairs, need at least {n_min}")


class InsufficientOverlap(DataError):
    pass


class ZeroVariance(DataError):
    pass


# gridmap
class MissingOnset(DataError):
    def __init__(self, hive_id: str):
        self.hive_id = hive_id
        super().__init__(f"no collapse onset for eventually-collapsed hive {hive_id!r}")


# collapse_stats
class WindowTooLong(DataError):
    pass


class TooFewWindows(DataError):
    pass


class EmptyIncrements(DataError):
    pass


class BinMismatch(DataError):
    pass
