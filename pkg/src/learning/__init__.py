"""Sphere classifier: network, training, analysis."""
