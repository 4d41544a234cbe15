"""Connections on fiber bundles in local coordinates."""

__version__ = "0.1.0"
