"""Geometry stages: mesh loading, solid voxelization, SDF, sphere construction."""
