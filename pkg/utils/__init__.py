"""Utility modules for configuration, errors and random streams."""
