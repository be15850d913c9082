"""
Domain types shared by every stage of the mesh-to-classification pipeline.

Mesh → VoxelGrid → SdfGrid → SphereSet → SphereSample. Array-holding types are
dataclasses over numpy arrays; grid indices are always ordered (i, j, k) with
i along x, j along y and k along z.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np


# ============================================================================
# Enumerations
# ============================================================================

class SphereSide(str, Enum):
    """Which SDF region spheres are built in."""
    INTERIOR = "interior"  # negative SDF, inside the object
    EXTERIOR = "exterior"  # positive SDF, between object and external sphere
    MIXED = "mixed"        # interior spheres followed by exterior spheres

    @property
    def code(self) -> int:
        """Single-byte code stored in sphere cache headers."""
        return _SIDE_CODES[self]

    @classmethod
    def from_code(cls, code: int) -> "SphereSide":
        for side, value in _SIDE_CODES.items():
            if value == code:
                return side
        raise ValueError(f"Unknown sphere side code: {code}")


_SIDE_CODES = {
    SphereSide.INTERIOR: 0,
    SphereSide.EXTERIOR: 1,
    SphereSide.MIXED: 2,
}


class Split(str, Enum):
    """ModelNet dataset split."""
    TRAIN = "train"
    TEST = "test"


# ============================================================================
# Geometry
# ============================================================================

@dataclass
class TriangleMesh:
    """A triangulated surface.

    vertices is (V, 3) float64 in model units, faces is (F, 3) int64.
    """

    vertices: np.ndarray
    faces: np.ndarray
    label: Optional[str] = None

    @property
    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        """Axis-aligned (min, max) corners."""
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    @property
    def extents(self) -> np.ndarray:
        lo, hi = self.bounds
        return hi - lo

    @property
    def triangles(self) -> np.ndarray:
        """(F, 3, 3) array of triangle corner coordinates."""
        return self.vertices[self.faces]


@dataclass
class VoxelGrid:
    """Dense solid occupancy over the cube [-0.5, 0.5]³ at resolution R."""

    resolution: int
    occupancy: np.ndarray  # (R, R, R) bool, indexed [i, j, k]

    @property
    def voxel_size(self) -> float:
        return 1.0 / self.resolution

    @property
    def occupied_count(self) -> int:
        return int(self.occupancy.sum())

    def centers(self) -> np.ndarray:
        """Normalized coordinate of each voxel center along one axis."""
        return (np.arange(self.resolution) + 0.5) / self.resolution - 0.5


@dataclass
class SdfGrid:
    """Signed distance (voxel units) from every voxel center to the nearest surface voxel.

    values holds NaN outside the external sphere; downstream code must filter
    on the valid mask. squared holds the exact integer squared distance for
    every voxel (valid or not).
    """

    resolution: int
    values: np.ndarray     # (R, R, R) float64, NaN where invalid
    valid: np.ndarray      # (R, R, R) bool
    squared: np.ndarray    # (R, R, R) int64
    occupancy: np.ndarray  # (R, R, R) bool
    surface: np.ndarray    # (S, 3) int64 surface voxel coordinates

    @property
    def external_radius(self) -> float:
        """Radius of the external sphere in voxel units."""
        return self.resolution / 2.0


@dataclass(frozen=True)
class InfillingSphere:
    """A sphere centered on a voxel and tangent to the object surface."""

    center: Tuple[int, int, int]
    radius: float
    side: SphereSide
    contact_count: int


@dataclass
class SphereSet:
    """Ordered greedy output; construction order is big-to-small per phase."""

    spheres: List[InfillingSphere]
    n_requested: int
    resolution: int
    side: SphereSide
    d_schedule: List[float] = field(default_factory=list)
    n_interior: int = 0  # number of leading interior spheres (mixed sets)

    def __len__(self) -> int:
        return len(self.spheres)

    @property
    def is_short(self) -> bool:
        """True when the grid ran out of eligible voxels before n_requested."""
        return len(self.spheres) < self.n_requested

    def centers(self) -> np.ndarray:
        return np.array([s.center for s in self.spheres], dtype=np.int64).reshape(-1, 3)

    def radii(self) -> np.ndarray:
        return np.array([s.radius for s in self.spheres], dtype=np.float64)

    def contact_counts(self) -> np.ndarray:
        return np.array([s.contact_count for s in self.spheres], dtype=np.int64)

    def part(self, side: SphereSide) -> "SphereSet":
        """Spheres of one side, preserving construction order."""
        if self.side != SphereSide.MIXED:
            return self if side == self.side else self._with([], 0, side)
        spheres = [s for s in self.spheres if s.side == side]
        n_int = self.n_interior if side == SphereSide.INTERIOR else 0
        return self._with(spheres, len(spheres), side, n_interior=n_int)

    def truncated(self, k: int) -> "SphereSet":
        """Coarse-to-fine prefix of k spheres.

        Mixed sets keep a prefix of each side. k is split the way mixed
        requests are (k - k // 2 interior, k // 2 exterior), and a side that
        came up short hands its unused rows to the other side.
        """
        if k >= len(self.spheres):
            return self
        if self.side != SphereSide.MIXED:
            return self._with(self.spheres[:k], k, self.side)

        interior = [s for s in self.spheres if s.side == SphereSide.INTERIOR]
        exterior = [s for s in self.spheres if s.side == SphereSide.EXTERIOR]
        k_int = min(len(interior), k - k // 2)
        k_ext = min(len(exterior), k - k_int)
        k_int = min(len(interior), k - k_ext)
        return self._with(interior[:k_int] + exterior[:k_ext], k, self.side, n_interior=k_int)

    def _with(self, spheres, n_requested, side, n_interior: int = 0) -> "SphereSet":
        return SphereSet(
            spheres=list(spheres),
            n_requested=n_requested,
            resolution=self.resolution,
            side=side,
            d_schedule=list(self.d_schedule),
            n_interior=n_interior if side != SphereSide.INTERIOR else len(spheres),
        )


@dataclass
class SphereSample:
    """Network input for one object: n rows of (x, y, z, r)."""

    features: np.ndarray  # (n, 4) float32
    label: int
    padded: bool = False

    @property
    def n(self) -> int:
        return int(self.features.shape[0])
