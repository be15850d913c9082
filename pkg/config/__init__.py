"""Configuration package: pipeline settings, network presets, logging."""
