"""Hive status diagnosis from paired environmental and hive temperature series."""

__version__ = "0.1.0"
