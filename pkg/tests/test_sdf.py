"""
Tests for the signed distance field and its brute-force oracle.
"""

import numpy as np
import pytest

from src.errors import EmptyGrid, ResolutionTooLarge
from src.geometry.sdf import (
    BRUTE_FORCE_MAX_RESOLUTION,
    brute_force_sdf,
    compute_sdf,
    external_sphere_mask,
    squared_distances,
)
from src.geometry.voxel import surface_mask
from src.state import VoxelGrid
from tests.fixtures.meshes import ball_grid, random_union_grid

SMALL_RESOLUTIONS = (12, 16, 20, 24)
LARGE_RESOLUTIONS = (32, 40, 48)


# ============================================================================
# Oracle Tests
# ============================================================================

@pytest.mark.oracle
class TestSdfOracle:
    """compute_sdf must match the brute-force minimum exactly."""

    @pytest.mark.parametrize("seed", range(40))
    def test_random_unions_match_exactly(self, seed):
        grid = random_union_grid(np.random.default_rng(seed), SMALL_RESOLUTIONS[seed % len(SMALL_RESOLUTIONS)])

        fast = compute_sdf(grid)
        slow = brute_force_sdf(grid)

        assert np.array_equal(fast.squared, slow.squared)
        assert np.array_equal(fast.valid, slow.valid)
        assert np.array_equal(np.isnan(fast.values), np.isnan(slow.values))
        assert np.array_equal(fast.values[fast.valid], slow.values[slow.valid])

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", range(10))
    def test_random_unions_at_larger_resolution(self, seed):
        resolution = LARGE_RESOLUTIONS[seed % len(LARGE_RESOLUTIONS)]
        grid = random_union_grid(np.random.default_rng(100 + seed), resolution, n_boxes=3, n_balls=3)

        assert np.array_equal(compute_sdf(grid).squared, brute_force_sdf(grid).squared)

    def test_single_voxel(self):
        occupancy = np.zeros((9, 9, 9), dtype=bool)
        occupancy[4, 4, 4] = True

        sdf = compute_sdf(VoxelGrid(9, occupancy))

        assert sdf.squared[4, 4, 4] == 0
        assert sdf.squared[0, 4, 4] == 16
        assert sdf.squared[5, 5, 5] == 3
        assert np.array_equal(sdf.squared, brute_force_sdf(VoxelGrid(9, occupancy)).squared)

    def test_brute_force_resolution_limit(self):
        resolution = BRUTE_FORCE_MAX_RESOLUTION + 8
        grid = VoxelGrid(resolution, np.zeros((resolution,) * 3, dtype=bool))

        with pytest.raises(ResolutionTooLarge):
            brute_force_sdf(grid)


# ============================================================================
# Property Tests
# ============================================================================

@pytest.mark.unit
class TestSdfProperties:
    """Sign convention, validity mask and regularity."""

    def test_signs(self, ball_sdf):
        surface = surface_mask(ball_sdf.occupancy)
        values, valid = ball_sdf.values, ball_sdf.valid

        assert np.all(values[surface & valid] == 0.0)
        assert np.all(values[ball_sdf.occupancy & ~surface & valid] < 0.0)
        assert np.all(values[~ball_sdf.occupancy & valid] > 0.0)

    def test_invalid_voxels_are_nan(self, ball_sdf):
        assert np.all(np.isnan(ball_sdf.values[~ball_sdf.valid]))
        assert not np.any(np.isnan(ball_sdf.values[ball_sdf.valid]))

    def test_valid_mask_is_external_sphere(self, ball_sdf):
        assert np.array_equal(ball_sdf.valid, external_sphere_mask(24))
        # grid corners lie outside the external sphere, the center inside
        assert not ball_sdf.valid[0, 0, 0]
        assert ball_sdf.valid[12, 12, 12]

    def test_one_lipschitz_along_axes(self, rng):
        sdf = compute_sdf(random_union_grid(rng, 16))
        values = np.where(sdf.valid, sdf.values, np.nan)

        for axis in range(3):
            step = np.abs(np.diff(values, axis=axis))
            assert np.nanmax(step) <= 1.0 + 1e-9

    def test_magnitude_matches_squared(self, ball_sdf):
        valid = ball_sdf.valid
        assert np.allclose(np.abs(ball_sdf.values[valid]), np.sqrt(ball_sdf.squared[valid]))

    def test_surface_list(self, ball_sdf):
        assert ball_sdf.surface.shape[1] == 3
        assert np.all(ball_sdf.squared[tuple(ball_sdf.surface.T)] == 0)

    def test_squared_distances_marks_invalid(self, ball_sdf):
        squared = squared_distances(ball_sdf)

        assert np.all(squared[~ball_sdf.valid] == -1)
        assert np.array_equal(squared[ball_sdf.valid], ball_sdf.squared[ball_sdf.valid])

    def test_ball_center_depth(self):
        sdf = compute_sdf(ball_grid(32, 10.0))

        # nearest surface voxel to the center lies between 9 and 10 voxels away
        assert -10.0 <= sdf.values[16, 16, 16] <= -9.0

    def test_solid_cube_example(self):
        occupancy = np.zeros((64, 64, 64), dtype=bool)
        occupancy[16:48, 16:48, 16:48] = True

        sdf = compute_sdf(VoxelGrid(64, occupancy))

        assert sdf.values[31, 31, 31] == -15.0
        assert not sdf.valid[0, 0, 0]
        assert np.isnan(sdf.values[0, 0, 0])
        assert sdf.values[16, 31, 31] == 0.0
        assert sdf.values[10, 31, 31] == 6.0

    def test_empty_grid(self):
        with pytest.raises(EmptyGrid):
            compute_sdf(VoxelGrid(8, np.zeros((8, 8, 8), dtype=bool)))
