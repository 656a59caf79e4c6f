"""Mobility-aware resource allocation for indoor VLC networks."""

__version__ = "0.1.0"
