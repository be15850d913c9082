"""
Solid voxelization by parity scanline fill.

Rays are cast along +x through the (y, z) center of every grid column. Each
triangle is projected onto the yz-plane; the columns whose center falls inside
the projection record the x at which the ray crosses the triangle. Sorted
crossings pair up into inside intervals, and a voxel is occupied when its
center lies inside or on one of them.

Thin features that span no voxel center (a crossing pair closer than one
voxel, or an unpaired crossing on an open sheet) mark the voxel containing the
crossing, so plane-thin geometry still produces a shell.
"""

import logging
from typing import Iterator, Optional, Tuple

import numpy as np

from config.pipeline_config import PathSettings
from src.errors import DegenerateMesh, EmptyMesh, ResolutionTooLarge, UserError
from src.state import TriangleMesh, VoxelGrid

logger = logging.getLogger(__name__)

MIN_RESOLUTION = 8

RAY_JITTER = 1e-9
"""Offset (normalized units) applied to ray origins that hit an edge or vertex exactly"""

PAIR_CHUNK = 1 << 20
"""Maximum (triangle, column) pairs evaluated per vectorized chunk"""


def _column_range(lo: np.ndarray, hi: np.ndarray, resolution: int) -> Tuple[np.ndarray, np.ndarray]:
    """Inclusive index range of column centers within [lo, hi] (normalized coordinates)."""
    start = np.ceil((lo - RAY_JITTER + 0.5) * resolution - 0.5).astype(np.int64)
    stop = np.floor((hi + RAY_JITTER + 0.5) * resolution - 0.5).astype(np.int64)
    return np.maximum(start, 0), np.minimum(stop, resolution - 1)


def _edge_weights(tri_yz: np.ndarray, qy: np.ndarray, qz: np.ndarray) -> np.ndarray:
    """Signed sub-areas (w0, w1, w2) of the query point against each projected edge.

    tri_yz is (P, 3, 2); the returned (P, 3) weights are barycentric
    coordinates scaled by twice the signed projected area.
    """
    p0, p1, p2 = tri_yz[:, 0], tri_yz[:, 1], tri_yz[:, 2]

    def cross(a, b):
        return (b[:, 0] - a[:, 0]) * (qz - a[:, 1]) - (b[:, 1] - a[:, 1]) * (qy - a[:, 0])

    return np.stack([cross(p1, p2), cross(p2, p0), cross(p0, p1)], axis=1)


def _contains(w: np.ndarray) -> np.ndarray:
    return np.all(w >= 0, axis=1) | np.all(w <= 0, axis=1)


def _candidate_pairs(tri_yz: np.ndarray, resolution: int) -> Iterator[Tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Yield chunks of (triangle, j, k) whose column center lies in the triangle's yz bounding box."""
    j_lo, j_hi = _column_range(tri_yz[:, :, 0].min(axis=1), tri_yz[:, :, 0].max(axis=1), resolution)
    k_lo, k_hi = _column_range(tri_yz[:, :, 1].min(axis=1), tri_yz[:, :, 1].max(axis=1), resolution)
    nj = np.maximum(j_hi - j_lo + 1, 0)
    nk = np.maximum(k_hi - k_lo + 1, 0)
    counts = nj * nk
    boundaries = np.concatenate([[0], np.cumsum(counts)])

    start = 0
    while start < len(counts):
        stop = int(np.searchsorted(boundaries, boundaries[start] + PAIR_CHUNK, side="right")) - 1
        stop = max(stop, start + 1)
        chunk_counts = counts[start:stop]
        total = int(chunk_counts.sum())
        if total:
            tri = np.repeat(np.arange(start, stop), chunk_counts)
            offset = np.arange(total) - np.repeat(boundaries[start:stop] - boundaries[start], chunk_counts)
            yield tri, j_lo[tri] + offset // nk[tri], k_lo[tri] + offset % nk[tri]
        start = stop


def _ray_crossings(triangles: np.ndarray, resolution: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Collect every (column j, column k, x) where a +x ray crosses a triangle.

    A ray that hits a projected edge or vertex exactly is re-cast for the whole
    column from an origin jittered by half of RAY_JITTER, so adjacent triangles
    sharing that edge agree on a single crossing.

    Returns:
        Tuple of (j, k, x) arrays
    """
    tri_yz = triangles[:, :, 1:]
    w_area = _edge_weights(tri_yz, tri_yz[:, 0, 0], tri_yz[:, 0, 1])[:, 0]
    keep = w_area != 0.0  # triangles parallel to the rays never cross them
    triangles, tri_yz = triangles[keep], tri_yz[keep]
    centers = (np.arange(resolution) + 0.5) / resolution - 0.5

    # pass 1: columns whose ray hits an edge or vertex exactly
    ambiguous_ids = []
    for tri, j, k in _candidate_pairs(tri_yz, resolution):
        w = _edge_weights(tri_yz[tri], centers[j], centers[k])
        hit = _contains(w) & np.any(w == 0, axis=1)
        if hit.any():
            ambiguous_ids.append(np.unique(j[hit] * resolution + k[hit]))
    ambiguous_ids = np.unique(np.concatenate(ambiguous_ids)) if ambiguous_ids else np.empty(0, np.int64)
    if ambiguous_ids.size:
        logger.debug(f"Re-casting {ambiguous_ids.size} columns after exact edge hits")

    # pass 2: crossings, with jittered origins in ambiguous columns
    out_j, out_k, out_x = [], [], []
    for tri, j, k in _candidate_pairs(tri_yz, resolution):
        jitter = np.isin(j * resolution + k, ambiguous_ids)
        qy = centers[j] + np.where(jitter, 0.5 * RAY_JITTER, 0.0)
        qz = centers[k] + np.where(jitter, 0.25 * RAY_JITTER, 0.0)
        w = _edge_weights(tri_yz[tri], qy, qz)
        inside = _contains(w)
        tri, w = tri[inside], w[inside]
        xs = triangles[tri, :, 0]
        out_j.append(j[inside])
        out_k.append(k[inside])
        out_x.append((w * xs).sum(axis=1) / w.sum(axis=1))

    if not out_j:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty, np.empty(0, dtype=np.float64)
    return np.concatenate(out_j), np.concatenate(out_k), np.concatenate(out_x)


def voxelize_solid(mesh: TriangleMesh, resolution: int, max_voxels: Optional[int] = None) -> VoxelGrid:
    """
    Convert a normalized mesh into a dense solid occupancy grid.

    The grid covers the fixed cube [-0.5, 0.5]³; voxel (i, j, k) is occupied
    iff its center is inside or on the mesh by ray parity.

    Args:
        mesh: Normalized triangle mesh
        resolution: Grid resolution R (>= 8)
        max_voxels: Cap on R³ (defaults to INSPHERE_MAX_VOXELS)

    Returns:
        VoxelGrid at resolution R

    Raises:
        UserError: resolution below 8
        ResolutionTooLarge: R³ exceeds the memory cap
        EmptyMesh / DegenerateMesh: Nothing to voxelize
    """
    if resolution < MIN_RESOLUTION:
        raise UserError(f"Resolution must be >= {MIN_RESOLUTION}, got {resolution}")
    cap = max_voxels if max_voxels is not None else PathSettings.max_voxels()
    if resolution ** 3 > cap:
        raise ResolutionTooLarge(f"Resolution {resolution}³ exceeds the voxel cap of {cap}")
    if len(mesh.faces) == 0:
        raise EmptyMesh("Cannot voxelize a mesh without faces")
    if not float(mesh.extents.max()) > 0.0:
        raise DegenerateMesh("Cannot voxelize a mesh with zero extent")

    j, k, x = _ray_crossings(mesh.triangles.astype(np.float64), resolution)

    order = np.lexsort((x, k, j))
    j, k, x = j[order], k[order], x[order]

    # rank of each crossing within its column
    column = j * resolution + k
    is_first = np.ones(len(column), dtype=bool)
    is_first[1:] = column[1:] != column[:-1]
    run_start = np.flatnonzero(is_first)
    run_length = np.diff(np.append(run_start, len(column)))
    rank = np.arange(len(column)) - np.repeat(run_start, run_length)
    length = np.repeat(run_length, run_length)

    # pair 0-1, 2-3, ...; a trailing odd crossing is unpaired
    opening = np.flatnonzero((rank % 2 == 0) & (rank + 1 < length))
    unpaired = (rank % 2 == 0) & (rank + 1 >= length)
    a, b = x[opening], x[opening + 1]
    pj, pk = j[opening], k[opening]

    i_first = np.clip(np.ceil((a + 0.5) * resolution - 0.5).astype(np.int64), 0, resolution)
    i_last = np.clip(np.floor((b + 0.5) * resolution - 0.5).astype(np.int64), -1, resolution - 1)
    spans = i_first <= i_last

    diff = np.zeros((resolution + 1, resolution, resolution), dtype=np.int32)
    np.add.at(diff, (i_first[spans], pj[spans], pk[spans]), 1)
    np.add.at(diff, (i_last[spans] + 1, pj[spans], pk[spans]), -1)
    occupancy = np.cumsum(diff, axis=0)[:resolution] > 0

    thin_x = np.concatenate([a[~spans], x[unpaired]])
    thin_j = np.concatenate([pj[~spans], j[unpaired]])
    thin_k = np.concatenate([pk[~spans], k[unpaired]])
    in_grid = (thin_x >= -0.5) & (thin_x <= 0.5)
    thin_i = np.clip(np.floor((thin_x[in_grid] + 0.5) * resolution).astype(np.int64), 0, resolution - 1)
    occupancy[thin_i, thin_j[in_grid], thin_k[in_grid]] = True

    grid = VoxelGrid(resolution=resolution, occupancy=occupancy)
    logger.debug(
        f"Voxelized {len(mesh.faces)} triangles at {resolution}³: "
        f"{grid.occupied_count} occupied, {int(unpaired.sum())} unpaired crossings"
    )
    return grid


def surface_mask(occupancy: np.ndarray) -> np.ndarray:
    """Occupied voxels with at least one unoccupied (or out-of-grid) 6-neighbor."""
    padded = np.pad(occupancy, 1, mode="constant", constant_values=False)
    enclosed = np.ones_like(occupancy, dtype=bool)
    for axis in range(3):
        for step in (-1, 1):
            shifted = np.roll(padded, step, axis=axis)
            enclosed &= shifted[1:-1, 1:-1, 1:-1]
    return occupancy & ~enclosed


def surface_voxels(grid: VoxelGrid) -> np.ndarray:
    """
    Occupied voxels with at least one unoccupied 6-neighbor.

    Neighbors beyond the grid boundary count as unoccupied.

    Returns:
        (S, 3) int64 array of (i, j, k), lexicographically sorted
    """
    return np.argwhere(surface_mask(grid.occupancy)).astype(np.int64)


def fill_fraction(grid: VoxelGrid) -> float:
    """Occupied fraction of the R³ grid."""
    return grid.occupied_count / float(grid.resolution ** 3)
