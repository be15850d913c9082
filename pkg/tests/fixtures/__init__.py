"""Test fixtures: synthetic meshes, voxel grids and datasets."""
