"""Uplink OFDM ISAC link-level simulator with adaptive phase-shifted pilots."""

__version__ = "0.1.0"
