"""
Greedy infilling-sphere construction.

Every eligible voxel defines a candidate sphere centered on the voxel with
radius |SDF|. Candidates are sorted big-to-small (ties: more surface contacts
first, then lexicographic voxel order) and accepted greedily over a schedule
of separation thresholds d (10, 5, 0 at 512³):

- accept x_i when distance(x_i, x_j) >= s_i + s_j + d for every accepted Y_j
- reject x_i for good when distance(x_i, x_j) < s_i + s_j for some Y_j
- otherwise x_i stays eligible for the next, smaller d

Construction stops once n spheres are accepted or candidates run out.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from config.pipeline_config import DEFAULT_D_SCHEDULE, REFERENCE_RESOLUTION
from src.errors import NoCandidates, UserError
from src.state import InfillingSphere, SdfGrid, SphereSet, SphereSide

logger = logging.getLogger(__name__)

CONTACT_TOLERANCE = 0.5
"""Half a voxel: surface voxels within this band of the sphere boundary are contacts"""

_EMPTY, _ACCEPTED, _REJECTED = 0, 1, 2


@dataclass
class CandidateList:
    """Sorted candidate spheres for one side of an SDF grid."""

    centers: np.ndarray   # (C, 3) int64
    radii: np.ndarray     # (C,) float64, effective radius
    contacts: np.ndarray  # (C,) int64
    side: SphereSide

    def __len__(self) -> int:
        return len(self.radii)


# ============================================================================
# Contacts and candidates
# ============================================================================

def contact_count(
    sphere_center: Sequence[int],
    radius: float,
    surface: np.ndarray,
    tolerance: float = CONTACT_TOLERANCE,
) -> int:
    """
    Number of surface voxels lying on the sphere boundary.

    A surface voxel s is a contact when |distance(center, s) - radius| <= tolerance.

    Args:
        sphere_center: Voxel coordinates (i, j, k)
        radius: Sphere radius in voxels (>= 0)
        surface: (S, 3) surface voxel coordinates
        tolerance: Contact band half-width

    Returns:
        Contact count
    """
    if radius < 0:
        raise UserError(f"Sphere radius must be non-negative, got {radius}")
    if len(surface) == 0:
        return 0
    delta = np.asarray(surface, dtype=np.int64) - np.asarray(sphere_center, dtype=np.int64)
    distance = np.sqrt((delta * delta).sum(axis=1).astype(np.float64))
    return int(np.count_nonzero(np.abs(distance - radius) <= tolerance))


def effective_radii(sdf: SdfGrid, centers: np.ndarray, side: SphereSide) -> np.ndarray:
    """
    |SDF| at each center; exterior radii are clamped to stay inside the external sphere.

    Args:
        sdf: SDF grid
        centers: (C, 3) voxel coordinates
        side: interior or exterior

    Returns:
        (C,) radii in voxel units
    """
    i, j, k = centers[:, 0], centers[:, 1], centers[:, 2]
    radii = np.abs(sdf.values[i, j, k])
    if side == SphereSide.EXTERIOR:
        doubled = 2 * centers + 1 - sdf.resolution
        to_center = np.sqrt((doubled * doubled).sum(axis=1).astype(np.float64)) / 2.0
        radii = np.minimum(radii, sdf.external_radius - to_center)
    return radii


def _side_mask(sdf: SdfGrid, side: SphereSide) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        if side == SphereSide.INTERIOR:
            return sdf.valid & (sdf.values < 0)
        if side == SphereSide.EXTERIOR:
            return sdf.valid & (sdf.values > 0)
    raise UserError(f"Candidates are built per side (interior or exterior), got {side.value}")


def _count_contacts(
    surface: np.ndarray,
    centers: np.ndarray,
    radii: np.ndarray,
    tolerance: float,
) -> np.ndarray:
    """
    Contact counts for many candidates at once.

    A KD-tree over the surface voxels returns a superset of each contact band;
    the band test itself uses the same arithmetic as contact_count so both
    agree voxel for voxel.
    """
    tree = cKDTree(surface.astype(np.float64))
    neighbors = tree.query_ball_point(centers.astype(np.float64), radii + tolerance + 1e-6)
    lengths = np.fromiter((len(members) for members in neighbors), dtype=np.int64, count=len(neighbors))
    if lengths.sum() == 0:
        return np.zeros(len(radii), dtype=np.int64)

    owner = np.repeat(np.arange(len(radii)), lengths)
    members = np.concatenate([np.asarray(m, dtype=np.int64) for m in neighbors if len(m)])
    delta = surface[members] - centers[owner]
    distance = np.sqrt((delta * delta).sum(axis=1).astype(np.float64))
    in_band = np.abs(distance - radii[owner]) <= tolerance
    return np.bincount(owner[in_band], minlength=len(radii)).astype(np.int64)


def sort_candidates(
    sdf: SdfGrid,
    side: SphereSide,
    tolerance: float = CONTACT_TOLERANCE,
) -> CandidateList:
    """
    Candidate spheres of one side, sorted for greedy construction.

    Negative SDF values are interior candidates, positive values exterior
    ones. Order: radius descending, contact count descending, then (i, j, k)
    ascending. Candidates without any surface contact are dropped.

    Args:
        sdf: SDF grid
        side: interior or exterior
        tolerance: Contact band half-width

    Returns:
        CandidateList in construction order

    Raises:
        NoCandidates: The side has no eligible voxel
    """
    centers = np.argwhere(_side_mask(sdf, side)).astype(np.int64)
    if len(centers) == 0:
        raise NoCandidates(f"No {side.value} voxels in the {sdf.resolution}³ SDF grid")

    radii = effective_radii(sdf, centers, side)
    contacts = _count_contacts(sdf.surface, centers, radii, tolerance)

    touching = (contacts >= 1) & (radii > 0)
    centers, radii, contacts = centers[touching], radii[touching], contacts[touching]
    if len(centers) == 0:
        raise NoCandidates(f"No {side.value} voxel of the {sdf.resolution}³ grid touches the surface")

    order = np.lexsort((centers[:, 2], centers[:, 1], centers[:, 0], -contacts, -radii))
    return CandidateList(centers=centers[order], radii=radii[order], contacts=contacts[order], side=side)


# ============================================================================
# Greedy construction
# ============================================================================

def scaled_schedule(d_schedule: Sequence[float], resolution: int, scale: bool = True) -> List[float]:
    """Express separation thresholds in voxels at the build resolution (floor 0)."""
    factor = resolution / REFERENCE_RESOLUTION if scale else 1.0
    return [max(0.0, float(d) * factor) for d in d_schedule]


def _validate_schedule(d_schedule: Sequence[float]) -> None:
    if not d_schedule or d_schedule[-1] != 0:
        raise UserError(f"d_schedule must end at 0, got {list(d_schedule)}")
    if any(a <= b for a, b in zip(d_schedule, d_schedule[1:])):
        raise UserError(f"d_schedule must be strictly decreasing, got {list(d_schedule)}")


def build_spheres(
    sdf: SdfGrid,
    side: SphereSide,
    n: int,
    d_schedule: Optional[Sequence[float]] = None,
    scale_d: bool = True,
    tolerance: float = CONTACT_TOLERANCE,
) -> SphereSet:
    """
    Greedily construct up to n non-intersecting infilling spheres on one side.

    Args:
        sdf: SDF grid
        side: interior or exterior
        n: Number of spheres requested (>= 1)
        d_schedule: Separation thresholds at 512³, strictly decreasing, ending at 0
        scale_d: Scale thresholds by R/512
        tolerance: Contact band half-width

    Returns:
        SphereSet in construction order; shorter than n when candidates run out

    Raises:
        NoCandidates: The side has no eligible voxel
    """
    if n < 1:
        raise UserError(f"Sphere count must be >= 1, got {n}")
    schedule = list(DEFAULT_D_SCHEDULE if d_schedule is None else d_schedule)
    _validate_schedule(schedule)

    candidates = sort_candidates(sdf, side, tolerance)
    centers = candidates.centers.astype(np.float64)
    radii = candidates.radii
    status = np.full(len(candidates), _EMPTY, dtype=np.int8)
    accepted: List[int] = []

    for phase, d in enumerate(scaled_schedule(schedule, sdf.resolution, scale_d)):
        if len(accepted) >= n:
            break
        # blocked: too close to an accepted sphere for this phase's threshold
        blocked = np.zeros(len(candidates), dtype=bool)
        for j in accepted:
            blocked |= _too_close(centers, radii, j, d)

        phase_start = len(accepted)
        position = 0
        while len(accepted) < n:
            eligible = np.flatnonzero((status[position:] == _EMPTY) & ~blocked[position:])
            if eligible.size == 0:
                break
            chosen = position + int(eligible[0])
            status[chosen] = _ACCEPTED
            accepted.append(chosen)
            position = chosen + 1

            overlap = _too_close(centers, radii, chosen, 0.0)
            status[overlap & (status == _EMPTY)] = _REJECTED
            blocked |= _too_close(centers, radii, chosen, d)

        logger.debug(f"{side.value} phase d={d:g}: accepted {len(accepted) - phase_start}")

    spheres = [
        InfillingSphere(
            center=tuple(int(c) for c in candidates.centers[index]),
            radius=float(radii[index]),
            side=side,
            contact_count=int(candidates.contacts[index]),
        )
        for index in accepted
    ]
    sphere_set = SphereSet(
        spheres=spheres,
        n_requested=n,
        resolution=sdf.resolution,
        side=side,
        d_schedule=schedule,
        n_interior=len(spheres) if side == SphereSide.INTERIOR else 0,
    )
    if sphere_set.is_short:
        logger.warning(f"Only {len(sphere_set)} of {n} {side.value} spheres fit at {sdf.resolution}³")
    return sphere_set


def _too_close(centers: np.ndarray, radii: np.ndarray, j: int, d: float) -> np.ndarray:
    """Candidates whose distance to candidate j is below s_i + s_j + d."""
    delta = centers - centers[j]
    distance = np.sqrt((delta * delta).sum(axis=1))
    return distance < radii + radii[j] + d


def build_mixed(
    sdf: SdfGrid,
    n_interior: int,
    n_exterior: int,
    d_schedule: Optional[Sequence[float]] = None,
    scale_d: bool = True,
    tolerance: float = CONTACT_TOLERANCE,
) -> SphereSet:
    """
    Independent interior and exterior builds, interior spheres first.

    A zero count on one side returns the other side's build unchanged.

    Raises:
        UserError: Negative counts or both zero
        NoCandidates: Propagated from build_spheres
    """
    if n_interior < 0 or n_exterior < 0 or n_interior + n_exterior == 0:
        raise UserError(f"Invalid mixed counts ({n_interior}, {n_exterior})")
    if n_exterior == 0:
        return build_spheres(sdf, SphereSide.INTERIOR, n_interior, d_schedule, scale_d, tolerance)
    if n_interior == 0:
        return build_spheres(sdf, SphereSide.EXTERIOR, n_exterior, d_schedule, scale_d, tolerance)

    interior = build_spheres(sdf, SphereSide.INTERIOR, n_interior, d_schedule, scale_d, tolerance)
    exterior = build_spheres(sdf, SphereSide.EXTERIOR, n_exterior, d_schedule, scale_d, tolerance)
    return SphereSet(
        spheres=interior.spheres + exterior.spheres,
        n_requested=n_interior + n_exterior,
        resolution=sdf.resolution,
        side=SphereSide.MIXED,
        d_schedule=interior.d_schedule,
        n_interior=len(interior),
    )


# ============================================================================
# Reference implementation and measures
# ============================================================================

def reference_greedy(
    sdf: SdfGrid,
    side: SphereSide,
    n: int,
    d_schedule: Optional[Sequence[float]] = None,
    scale_d: bool = True,
    tolerance: float = CONTACT_TOLERANCE,
) -> List[InfillingSphere]:
    """
    Straightline greedy construction used to cross-check build_spheres.

    Scans every voxel, counts contacts by brute force and compares each
    candidate against every accepted sphere one pair at a time. No spatial
    index, no vectorized masks. Only practical for small grids.
    """
    schedule = scaled_schedule(list(DEFAULT_D_SCHEDULE if d_schedule is None else d_schedule),
                               sdf.resolution, scale_d)
    resolution = sdf.resolution
    half = resolution / 2.0

    candidates = []
    for i in range(resolution):
        for j in range(resolution):
            for k in range(resolution):
                if not sdf.valid[i, j, k]:
                    continue
                value = float(sdf.values[i, j, k])
                if side == SphereSide.INTERIOR and not value < 0:
                    continue
                if side == SphereSide.EXTERIOR and not value > 0:
                    continue
                radius = abs(value)
                if side == SphereSide.EXTERIOR:
                    to_center = float(np.sqrt(float((2 * i + 1 - resolution) ** 2
                                                    + (2 * j + 1 - resolution) ** 2
                                                    + (2 * k + 1 - resolution) ** 2))) / 2.0
                    radius = min(radius, half - to_center)
                if radius <= 0:
                    continue
                contacts = contact_count((i, j, k), radius, sdf.surface, tolerance)
                if contacts < 1:
                    continue
                candidates.append(((i, j, k), radius, contacts))

    if not candidates:
        raise NoCandidates(f"No {side.value} candidates")
    candidates.sort(key=lambda c: (-c[1], -c[2], c[0]))

    state = ["empty"] * len(candidates)
    accepted: List[int] = []
    for d in schedule:
        for index, (center, radius, _) in enumerate(candidates):
            if len(accepted) >= n:
                break
            if state[index] != "empty":
                continue
            separated = True
            for other in accepted:
                other_center, other_radius, _ = candidates[other]
                delta = [float(a - b) for a, b in zip(center, other_center)]
                distance = float(np.sqrt(delta[0] * delta[0] + delta[1] * delta[1] + delta[2] * delta[2]))
                if distance < radius + other_radius:
                    state[index] = "rejected"
                    separated = False
                    break
                if distance < radius + other_radius + d:
                    separated = False
            if separated:
                state[index] = "accepted"
                accepted.append(index)

    return [
        InfillingSphere(center=candidates[index][0], radius=candidates[index][1],
                        side=side, contact_count=candidates[index][2])
        for index in accepted
    ]


def union_volume(sphere_set: SphereSet) -> int:
    """Number of voxel centers covered by the union of the spheres."""
    resolution = sphere_set.resolution
    covered = np.zeros((resolution,) * 3, dtype=bool)
    for sphere in sphere_set.spheres:
        reach = int(np.floor(sphere.radius))
        lo = [max(0, c - reach) for c in sphere.center]
        hi = [min(resolution, c + reach + 1) for c in sphere.center]
        grids = np.ogrid[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
        dist2 = sum((g - c) ** 2 for g, c in zip(grids, sphere.center))
        covered[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] |= dist2 <= sphere.radius ** 2
    return int(covered.sum())
