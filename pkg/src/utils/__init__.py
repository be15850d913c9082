"""Shared helpers: output files and run history."""
