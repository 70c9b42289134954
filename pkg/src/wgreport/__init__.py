"""Consolidate standards-meeting records and generate per-working-group reports."""

__version__ = "0.1.0"
