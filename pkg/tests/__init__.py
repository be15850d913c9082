"""
Tests package for the Infilling-Sphere Pipeline.

This __init__.py file makes the tests directory a proper Python package,
allowing imports like: from tests.fixtures.meshes import ...
"""
