"""Scenario decomposition heuristics for two-stage stochastic MIPs."""

__version__ = "0.1.0"
