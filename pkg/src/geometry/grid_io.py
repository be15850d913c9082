"""
Binary dump formats for voxel grids, SDF grids and sphere sets.

All formats are little-endian and start with a 4-byte magic. Dense grids are
flattened row-major with i fastest (Fortran order over [i, j, k]).

IVOX: magic, u32 R, u64 config hash            (16-byte header), then R³ bits
ISDF: magic, u32 R, u64 config hash            (16-byte header), then R³ f32
ISPH: magic, u32 R, u8 side, u32 count, u32 n_requested, u32 n_interior,
      u64 config hash (29-byte header), then count records of
      (i, j, k as u16, radius as f32, contact_count as u16)
"""

import logging
import struct
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from src.errors import CacheCorrupt
from src.state import InfillingSphere, SdfGrid, SphereSet, SphereSide, VoxelGrid

logger = logging.getLogger(__name__)

VOXEL_MAGIC = b"IVOX"
SDF_MAGIC = b"ISDF"
SPHERE_MAGIC = b"ISPH"

_GRID_HEADER = struct.Struct("<4sIQ")
_SPHERE_HEADER = struct.Struct("<4sIBIIIQ")

SPHERE_RECORD = np.dtype([
    ("i", "<u2"),
    ("j", "<u2"),
    ("k", "<u2"),
    ("radius", "<f4"),
    ("contacts", "<u2"),
])

QUIET_NAN_BITS = np.uint32(0x7FC00000)


def _read_bytes(path: Path) -> bytes:
    path = Path(path)
    if not path.is_file():
        raise CacheCorrupt(f"Cache file not found: {path}")
    return path.read_bytes()


def _grid_header(data: bytes, magic: bytes, path: Path) -> Tuple[int, int]:
    if len(data) < _GRID_HEADER.size:
        raise CacheCorrupt(f"Truncated header in {path}")
    found, resolution, config_tag = _GRID_HEADER.unpack_from(data)
    if found != magic:
        raise CacheCorrupt(f"Bad magic {found!r} in {path}, expected {magic!r}")
    return resolution, config_tag


# ============================================================================
# Voxel grids
# ============================================================================

def save_voxels(grid: VoxelGrid, path, config_tag: int = 0) -> Path:
    """Write an IVOX dump (occupancy bits, i fastest)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    bits = np.packbits(grid.occupancy.ravel(order="F"), bitorder="little")
    with open(path, "wb") as f:
        f.write(_GRID_HEADER.pack(VOXEL_MAGIC, grid.resolution, config_tag))
        f.write(bits.tobytes())
    return path


def load_voxels(path) -> VoxelGrid:
    """Read an IVOX dump."""
    data = _read_bytes(path)
    resolution, _ = _grid_header(data, VOXEL_MAGIC, path)
    count = resolution ** 3
    payload = np.frombuffer(data, dtype=np.uint8, offset=_GRID_HEADER.size)
    if payload.size * 8 < count:
        raise CacheCorrupt(f"Truncated voxel payload in {path}")
    bits = np.unpackbits(payload, count=count, bitorder="little").astype(bool)
    return VoxelGrid(resolution=resolution, occupancy=bits.reshape((resolution,) * 3, order="F"))


# ============================================================================
# SDF grids
# ============================================================================

def save_sdf(sdf: SdfGrid, path, config_tag: int = 0) -> Path:
    """Write an ISDF dump; invalid voxels are stored as the quiet-NaN bit pattern."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    values = sdf.values.astype("<f4").ravel(order="F")
    raw = values.view("<u4").copy()
    raw[~sdf.valid.ravel(order="F")] = QUIET_NAN_BITS
    with open(path, "wb") as f:
        f.write(_GRID_HEADER.pack(SDF_MAGIC, sdf.resolution, config_tag))
        f.write(raw.tobytes())
    return path


def load_sdf_values(path) -> Tuple[np.ndarray, np.ndarray]:
    """Read an ISDF dump as (values float32 with NaN, valid mask)."""
    data = _read_bytes(path)
    resolution, _ = _grid_header(data, SDF_MAGIC, path)
    count = resolution ** 3
    if len(data) - _GRID_HEADER.size < 4 * count:
        raise CacheCorrupt(f"Truncated SDF payload in {path}")
    values = np.frombuffer(data, dtype="<f4", count=count, offset=_GRID_HEADER.size)
    values = values.reshape((resolution,) * 3, order="F").copy()
    return values, ~np.isnan(values)


# ============================================================================
# Sphere sets
# ============================================================================

def save_spheres(sphere_set: SphereSet, path, config_tag: int = 0) -> Path:
    """Write an ISPH sphere cache."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    records = np.zeros(len(sphere_set), dtype=SPHERE_RECORD)
    if len(sphere_set):
        centers = sphere_set.centers()
        records["i"], records["j"], records["k"] = centers[:, 0], centers[:, 1], centers[:, 2]
        records["radius"] = sphere_set.radii()
        records["contacts"] = np.minimum(sphere_set.contact_counts(), np.iinfo(np.uint16).max)

    header = _SPHERE_HEADER.pack(
        SPHERE_MAGIC,
        sphere_set.resolution,
        sphere_set.side.code,
        len(sphere_set),
        sphere_set.n_requested,
        sphere_set.n_interior,
        config_tag,
    )
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        f.write(header)
        f.write(records.tobytes())
    tmp.replace(path)
    return path


def read_sphere_header(path) -> Tuple[int, SphereSide, int, int, int, int]:
    """Read (resolution, side, count, n_requested, n_interior, config_tag) without the records."""
    path = Path(path)
    if not path.is_file():
        raise CacheCorrupt(f"Cache file not found: {path}")
    with open(path, "rb") as f:
        head = f.read(_SPHERE_HEADER.size)
    return _parse_sphere_header(head, path)


def _parse_sphere_header(head: bytes, path: Path):
    if len(head) < _SPHERE_HEADER.size:
        raise CacheCorrupt(f"Truncated sphere header in {path}")
    magic, resolution, side_code, count, n_requested, n_interior, tag = _SPHERE_HEADER.unpack_from(head)
    if magic != SPHERE_MAGIC:
        raise CacheCorrupt(f"Bad magic {magic!r} in {path}, expected {SPHERE_MAGIC!r}")
    try:
        side = SphereSide.from_code(side_code)
    except ValueError as e:
        raise CacheCorrupt(f"{e} in {path}")
    return resolution, side, count, n_requested, n_interior, tag


def load_spheres(path, expected_tag: Optional[int] = None) -> SphereSet:
    """
    Read an ISPH sphere cache.

    Args:
        path: Cache file
        expected_tag: When given, the header's config hash must match

    Raises:
        CacheCorrupt: Missing file, bad magic, truncated records, hash mismatch
    """
    path = Path(path)
    data = _read_bytes(path)
    resolution, side, count, n_requested, n_interior, tag = _parse_sphere_header(data, path)
    if expected_tag is not None and tag != expected_tag:
        raise CacheCorrupt(f"Config hash {tag:016x} in {path} does not match {expected_tag:016x}")

    expected_size = _SPHERE_HEADER.size + count * SPHERE_RECORD.itemsize
    if len(data) != expected_size:
        raise CacheCorrupt(f"{path} holds {len(data)} bytes, expected {expected_size}")

    records = np.frombuffer(data, dtype=SPHERE_RECORD, count=count, offset=_SPHERE_HEADER.size)
    spheres = []
    for index, record in enumerate(records):
        if side == SphereSide.MIXED:
            sphere_side = SphereSide.INTERIOR if index < n_interior else SphereSide.EXTERIOR
        else:
            sphere_side = side
        spheres.append(InfillingSphere(
            center=(int(record["i"]), int(record["j"]), int(record["k"])),
            radius=float(record["radius"]),
            side=sphere_side,
            contact_count=int(record["contacts"]),
        ))

    return SphereSet(
        spheres=spheres,
        n_requested=n_requested,
        resolution=resolution,
        side=side,
        n_interior=n_interior,
    )
