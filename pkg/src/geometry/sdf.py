"""
Signed distance fields over voxel grids.

Distances are measured voxel center to voxel center, from every voxel to the
nearest surface voxel, in voxel units. Occupied voxels are negative, surface
voxels are zero, free voxels are positive. Only voxels inside the external
sphere (radius R/2 about the grid center) are valid; the rest hold NaN.
"""

import logging

import numpy as np
from scipy.ndimage import distance_transform_edt

from src.errors import EmptyGrid, ResolutionTooLarge
from src.geometry.voxel import surface_mask
from src.state import SdfGrid, VoxelGrid

logger = logging.getLogger(__name__)

BRUTE_FORCE_MAX_RESOLUTION = 64

INVALID = np.float64(np.nan)
"""Sentinel stored outside the external sphere"""


def external_sphere_mask(resolution: int) -> np.ndarray:
    """Voxels whose center lies within R/2 of the grid center.

    Evaluated in doubled integer coordinates, so the test is exact:
    sum((2i + 1 - R)²) <= R².
    """
    doubled = 2 * np.arange(resolution, dtype=np.int64) + 1 - resolution
    sq = doubled ** 2
    dist2 = sq[:, None, None] + sq[None, :, None] + sq[None, None, :]
    return dist2 <= resolution * resolution


def _assemble(grid: VoxelGrid, surface: np.ndarray, squared: np.ndarray) -> SdfGrid:
    """Build an SdfGrid from exact squared distances."""
    occupancy = grid.occupancy
    magnitude = np.sqrt(squared.astype(np.float64))
    values = np.where(occupancy, -magnitude, magnitude)
    values[surface] = 0.0

    valid = external_sphere_mask(grid.resolution)
    values[~valid] = INVALID

    return SdfGrid(
        resolution=grid.resolution,
        values=values,
        valid=valid,
        squared=squared,
        occupancy=occupancy,
        surface=np.argwhere(surface).astype(np.int64),
    )


def _surface_or_raise(grid: VoxelGrid) -> np.ndarray:
    if not grid.occupancy.any():
        raise EmptyGrid(f"Voxel grid at {grid.resolution}³ has no occupied voxel")
    return surface_mask(grid.occupancy)


def compute_sdf(grid: VoxelGrid) -> SdfGrid:
    """
    Exact signed Euclidean distance transform of a voxel grid.

    Uses scipy's separable exact EDT (one lower-envelope pass per axis) on the
    complement of the surface shell, so every voxel gets the distance to its
    nearest surface voxel. Squared distances are integers and are recovered
    exactly by rounding.

    Args:
        grid: Non-empty voxel grid

    Returns:
        SdfGrid with validity mask

    Raises:
        EmptyGrid: No occupied voxels
    """
    surface = _surface_or_raise(grid)
    distance = distance_transform_edt(~surface)
    squared = np.rint(distance * distance).astype(np.int64)

    sdf = _assemble(grid, surface, squared)
    logger.debug(
        f"SDF at {grid.resolution}³: {len(sdf.surface)} surface voxels, "
        f"{int(sdf.valid.sum())} valid voxels"
    )
    return sdf


def brute_force_sdf(grid: VoxelGrid) -> SdfGrid:
    """
    Reference SDF by direct minimum over all surface voxels.

    O(R³·S); intended as an oracle for compute_sdf on small grids.

    Raises:
        ResolutionTooLarge: R > 64
        EmptyGrid: No occupied voxels
    """
    if grid.resolution > BRUTE_FORCE_MAX_RESOLUTION:
        raise ResolutionTooLarge(
            f"Brute-force SDF is limited to R <= {BRUTE_FORCE_MAX_RESOLUTION}, got {grid.resolution}"
        )
    surface = _surface_or_raise(grid)
    surface_points = np.argwhere(surface).astype(np.int64)
    all_points = np.indices(grid.occupancy.shape).reshape(3, -1).T.astype(np.int64)

    squared = np.empty(len(all_points), dtype=np.int64)
    chunk = max(1, (1 << 22) // len(surface_points))
    for start in range(0, len(all_points), chunk):
        block = all_points[start:start + chunk]
        delta = block[:, None, :] - surface_points[None, :, :]
        squared[start:start + chunk] = (delta * delta).sum(axis=2).min(axis=1)

    return _assemble(grid, surface, squared.reshape(grid.occupancy.shape))


def squared_distances(sdf: SdfGrid) -> np.ndarray:
    """Exact integer squared distance per voxel (valid voxels only, -1 elsewhere)."""
    return np.where(sdf.valid, sdf.squared, -1)
