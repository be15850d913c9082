"""
Tests for greedy infilling-sphere construction.
"""

import itertools

import numpy as np
import pytest

from src.errors import NoCandidates, UserError
from src.geometry.sdf import compute_sdf
from src.geometry.spheres import (
    CONTACT_TOLERANCE,
    build_mixed,
    build_spheres,
    contact_count,
    effective_radii,
    reference_greedy,
    scaled_schedule,
    sort_candidates,
    union_volume,
)
from src.state import InfillingSphere, SphereSet, SphereSide, VoxelGrid
from tests.fixtures.meshes import ball_grid, random_union_grid


def assert_non_overlapping(sphere_set: SphereSet):
    for a, b in itertools.combinations(sphere_set.spheres, 2):
        distance = np.linalg.norm(np.subtract(a.center, b.center))
        assert distance >= a.radius + b.radius - 1e-9


# ============================================================================
# Contacts and Candidates
# ============================================================================

@pytest.mark.unit
@pytest.mark.fast
class TestContactCount:
    """Test the half-voxel contact band."""

    def test_counts_points_within_band(self):
        surface = np.array([[3, 0, 0], [0, 3, 0], [0, 0, 4], [2, 2, 0], [0, 0, 1]])

        # distances 3, 3, 4, 2.83, 1
        assert contact_count((0, 0, 0), 3.0, surface) == 3
        assert contact_count((0, 0, 0), 3.5, surface) == 3
        assert contact_count((0, 0, 0), 3.6, surface) == 1

    def test_tolerance_is_inclusive(self):
        surface = np.array([[2, 0, 0]])

        assert contact_count((0, 0, 0), 1.5, surface, tolerance=0.5) == 1
        assert contact_count((0, 0, 0), 1.4, surface, tolerance=0.5) == 0

    def test_empty_surface(self):
        assert contact_count((0, 0, 0), 1.0, np.zeros((0, 3), dtype=np.int64)) == 0

    def test_negative_radius(self):
        with pytest.raises(UserError):
            contact_count((0, 0, 0), -1.0, np.array([[1, 0, 0]]))


@pytest.mark.unit
class TestCandidates:
    """Test candidate sorting and radii."""

    def test_sort_order(self, ball_sdf):
        candidates = sort_candidates(ball_sdf, SphereSide.INTERIOR)

        keys = [
            (-r, -c, tuple(center))
            for r, c, center in zip(candidates.radii, candidates.contacts, candidates.centers.tolist())
        ]
        assert keys == sorted(keys)

    def test_every_candidate_touches_surface(self, ball_sdf):
        for side in (SphereSide.INTERIOR, SphereSide.EXTERIOR):
            candidates = sort_candidates(ball_sdf, side)

            assert np.all(candidates.contacts >= 1)
            assert np.all(candidates.radii > 0)

    def test_contacts_match_scalar_count(self, ball_sdf):
        candidates = sort_candidates(ball_sdf, SphereSide.INTERIOR)

        for index in range(0, len(candidates), 17):
            expected = contact_count(candidates.centers[index], candidates.radii[index], ball_sdf.surface)
            assert candidates.contacts[index] == expected

    def test_interior_radius_is_sdf_magnitude(self, ball_sdf):
        candidates = sort_candidates(ball_sdf, SphereSide.INTERIOR)
        i, j, k = candidates.centers.T

        assert np.array_equal(candidates.radii, -ball_sdf.values[i, j, k])

    def test_exterior_radius_stays_inside_external_sphere(self, ball_sdf):
        candidates = sort_candidates(ball_sdf, SphereSide.EXTERIOR)
        doubled = 2 * candidates.centers + 1 - ball_sdf.resolution
        to_center = np.sqrt((doubled ** 2).sum(axis=1)) / 2.0

        assert np.all(candidates.radii + to_center <= ball_sdf.resolution / 2.0 + 1e-9)

    def test_effective_radii_interior_unclamped(self, ball_sdf):
        centers = np.array([[12, 12, 12]])

        assert effective_radii(ball_sdf, centers, SphereSide.INTERIOR)[0] == abs(ball_sdf.values[12, 12, 12])

    def test_no_interior_in_a_shell(self):
        occupancy = np.zeros((12, 12, 12), dtype=bool)
        occupancy[4:8, 4:8, 6] = True  # one voxel thick: every voxel is surface

        with pytest.raises(NoCandidates):
            sort_candidates(compute_sdf(VoxelGrid(12, occupancy)), SphereSide.INTERIOR)

    def test_mixed_side_is_not_a_candidate_side(self, ball_sdf):
        with pytest.raises(UserError):
            sort_candidates(ball_sdf, SphereSide.MIXED)


# ============================================================================
# Greedy Construction
# ============================================================================

@pytest.mark.unit
class TestBuildSpheres:
    """Test the greedy builder's invariants."""

    @pytest.mark.parametrize("side", [SphereSide.INTERIOR, SphereSide.EXTERIOR])
    def test_invariants(self, ball_sdf, side):
        sphere_set = build_spheres(ball_sdf, side, 16)

        assert len(sphere_set) <= 16
        assert sphere_set.side == side
        assert_non_overlapping(sphere_set)
        for sphere in sphere_set.spheres:
            assert sphere.side == side
            assert sphere.contact_count >= 1
            value = ball_sdf.values[sphere.center]
            assert value < 0 if side == SphereSide.INTERIOR else value > 0

    def test_first_sphere_is_largest(self, ball_sdf):
        sphere_set = build_spheres(ball_sdf, SphereSide.INTERIOR, 8)
        candidates = sort_candidates(ball_sdf, SphereSide.INTERIOR)

        assert sphere_set.spheres[0].radius == candidates.radii[0]
        assert sphere_set.spheres[0].radius == max(s.radius for s in sphere_set.spheres)

    def test_ball_center_sphere_then_separated(self):
        sdf = compute_sdf(ball_grid(48, 20.0))
        sphere_set = build_spheres(sdf, SphereSide.INTERIOR, 3, d_schedule=[10, 5, 0], scale_d=False)

        first = sphere_set.spheres[0]
        assert np.abs(np.subtract(first.center, (24, 24, 24))).max() <= 1
        assert first.radius > 18.0
        for sphere in sphere_set.spheres[1:]:
            distance = np.linalg.norm(np.subtract(sphere.center, first.center))
            assert distance >= first.radius + sphere.radius
            assert sphere.radius < first.radius

    def test_prefix_property(self):
        sdf = compute_sdf(random_union_grid(np.random.default_rng(3), 20))

        small = build_spheres(sdf, SphereSide.INTERIOR, 6)
        large = build_spheres(sdf, SphereSide.INTERIOR, 12)

        assert small.spheres == large.spheres[:len(small)]

    def test_short_set_when_candidates_run_out(self):
        sdf = compute_sdf(ball_grid(16, 3.0))

        sphere_set = build_spheres(sdf, SphereSide.INTERIOR, 500)

        assert sphere_set.is_short
        assert 0 < len(sphere_set) < 500
        assert sphere_set.n_requested == 500
        assert_non_overlapping(sphere_set)

    def test_deterministic(self, ball_sdf):
        first = build_spheres(ball_sdf, SphereSide.EXTERIOR, 12)
        second = build_spheres(ball_sdf, SphereSide.EXTERIOR, 12)

        assert first.spheres == second.spheres

    def test_zero_count(self, ball_sdf):
        with pytest.raises(UserError):
            build_spheres(ball_sdf, SphereSide.INTERIOR, 0)

    @pytest.mark.parametrize("schedule", [[10, 5], [5, 10, 0], [10, 10, 0], []])
    def test_invalid_schedule(self, ball_sdf, schedule):
        with pytest.raises(UserError):
            build_spheres(ball_sdf, SphereSide.INTERIOR, 4, d_schedule=schedule)

    def test_scaled_schedule(self):
        assert scaled_schedule([10, 5, 0], 64) == [1.25, 0.625, 0.0]
        assert scaled_schedule([10, 5, 0], 64, scale=False) == [10.0, 5.0, 0.0]
        assert scaled_schedule([10, 5, 0], 512) == [10.0, 5.0, 0.0]

    def test_schedule_recorded(self, ball_sdf):
        sphere_set = build_spheres(ball_sdf, SphereSide.INTERIOR, 4, d_schedule=[8, 2, 0])

        assert sphere_set.d_schedule == [8, 2, 0]

    def test_default_tolerance(self):
        assert CONTACT_TOLERANCE == 0.5


@pytest.mark.unit
class TestBuildMixed:
    """Test interior-then-exterior sphere sets."""

    def test_interior_first(self, ball_sdf):
        sphere_set = build_mixed(ball_sdf, 5, 4)

        assert sphere_set.side == SphereSide.MIXED
        assert sphere_set.n_requested == 9
        sides = [s.side for s in sphere_set.spheres]
        assert sides == [SphereSide.INTERIOR] * sphere_set.n_interior + \
            [SphereSide.EXTERIOR] * (len(sphere_set) - sphere_set.n_interior)

    def test_parts_equal_single_side_builds(self, ball_sdf):
        sphere_set = build_mixed(ball_sdf, 5, 4)

        assert sphere_set.part(SphereSide.INTERIOR).spheres == \
            build_spheres(ball_sdf, SphereSide.INTERIOR, 5).spheres
        assert sphere_set.part(SphereSide.EXTERIOR).spheres == \
            build_spheres(ball_sdf, SphereSide.EXTERIOR, 4).spheres

    def test_zero_exterior_delegates(self, ball_sdf):
        sphere_set = build_mixed(ball_sdf, 5, 0)

        assert sphere_set.side == SphereSide.INTERIOR

    def test_invalid_counts(self, ball_sdf):
        with pytest.raises(UserError):
            build_mixed(ball_sdf, 0, 0)
        with pytest.raises(UserError):
            build_mixed(ball_sdf, -1, 3)

    def test_truncation_keeps_proportions(self):
        interior = [InfillingSphere((i, 0, 0), 1.0, SphereSide.INTERIOR, 1) for i in range(6)]
        exterior = [InfillingSphere((i, 9, 0), 1.0, SphereSide.EXTERIOR, 1) for i in range(6)]
        sphere_set = SphereSet(spheres=interior + exterior, n_requested=12, resolution=16,
                               side=SphereSide.MIXED, n_interior=6)

        head = sphere_set.truncated(4)

        assert len(head) == 4
        assert head.n_interior == 2
        assert sphere_set.truncated(5).n_interior == 3
        assert head.spheres[:2] == sphere_set.spheres[:2]
        assert head.spheres[2:] == sphere_set.spheres[sphere_set.n_interior:sphere_set.n_interior + 2]

    def test_truncation_keeps_every_interior_sphere_of_a_short_side(self):
        interior = [InfillingSphere((i, 0, 0), 1.0, SphereSide.INTERIOR, 1) for i in range(3)]
        exterior = [InfillingSphere((i, 9, 0), 1.0, SphereSide.EXTERIOR, 1) for i in range(16)]
        sphere_set = SphereSet(spheres=interior + exterior, n_requested=32, resolution=32,
                               side=SphereSide.MIXED, n_interior=3)

        head = sphere_set.truncated(10)

        assert head.n_interior == 3
        assert head.spheres == interior + exterior[:7]

    def test_truncation_short_exterior_hands_rows_to_interior(self):
        interior = [InfillingSphere((i, 0, 0), 1.0, SphereSide.INTERIOR, 1) for i in range(6)]
        exterior = [InfillingSphere((i, 9, 0), 1.0, SphereSide.EXTERIOR, 1) for i in range(2)]
        sphere_set = SphereSet(spheres=interior + exterior, n_requested=12, resolution=16,
                               side=SphereSide.MIXED, n_interior=6)

        head = sphere_set.truncated(7)

        assert head.n_interior == 5
        assert head.spheres == interior[:5] + exterior


# ============================================================================
# Oracle Tests
# ============================================================================

@pytest.mark.oracle
class TestGreedyOracle:
    """build_spheres must match the straightline greedy loop element for element."""

    @pytest.mark.parametrize("seed", range(5))
    @pytest.mark.parametrize("side", [SphereSide.INTERIOR, SphereSide.EXTERIOR])
    def test_random_unions(self, seed, side):
        sdf = compute_sdf(random_union_grid(np.random.default_rng(seed), 16))

        built = build_spheres(sdf, side, 24)
        oracle = reference_greedy(sdf, side, 24)

        assert built.spheres == oracle

    def test_unscaled_schedule(self):
        sdf = compute_sdf(random_union_grid(np.random.default_rng(11), 16))

        built = build_spheres(sdf, SphereSide.INTERIOR, 10, d_schedule=[4, 2, 0], scale_d=False)
        oracle = reference_greedy(sdf, SphereSide.INTERIOR, 10, d_schedule=[4, 2, 0], scale_d=False)

        assert built.spheres == oracle

    @pytest.mark.slow
    def test_large_ball(self):
        sdf = compute_sdf(ball_grid(48, 20.0))

        built = build_spheres(sdf, SphereSide.INTERIOR, 3, d_schedule=[10, 5, 0], scale_d=False)

        assert built.spheres == reference_greedy(sdf, SphereSide.INTERIOR, 3, [10, 5, 0], scale_d=False)


# ============================================================================
# Measures
# ============================================================================

@pytest.mark.unit
@pytest.mark.fast
class TestUnionVolume:

    def test_single_sphere_lattice_count(self):
        sphere = InfillingSphere(center=(8, 8, 8), radius=2.0, side=SphereSide.INTERIOR, contact_count=1)
        sphere_set = SphereSet(spheres=[sphere], n_requested=1, resolution=16, side=SphereSide.INTERIOR)

        # 1 + 6 + 12 + 8 + 6 lattice points within distance 2
        assert union_volume(sphere_set) == 33

    def test_overlapping_spheres_counted_once(self):
        sphere = InfillingSphere(center=(8, 8, 8), radius=1.0, side=SphereSide.INTERIOR, contact_count=1)
        sphere_set = SphereSet(spheres=[sphere, sphere], n_requested=2, resolution=16, side=SphereSide.INTERIOR)

        assert union_volume(sphere_set) == 7

    @pytest.mark.parametrize("side", [SphereSide.INTERIOR, SphereSide.EXTERIOR])
    def test_coverage_grows_with_sphere_count(self, side):
        sdf = compute_sdf(random_union_grid(np.random.default_rng(21), 24, n_boxes=2, n_balls=3))

        volumes = [union_volume(build_spheres(sdf, side, n)) for n in (1, 2, 4, 8, 16, 32)]

        assert volumes[0] > 0
        assert all(a <= b for a, b in zip(volumes, volumes[1:]))
