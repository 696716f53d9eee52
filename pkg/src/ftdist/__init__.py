"""Fault-tolerant approximate distance labels, their decoder and sensitivity oracles."""

__version__ = "0.1.0"
