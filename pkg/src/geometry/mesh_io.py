"""
Mesh loading and normalization.

Supports ASCII OFF files as shipped with ModelNet, including the known
malformed header where the counts share the first line ("OFF490 518 0").
Polygons with more than three vertices are fan-triangulated.
"""

import logging
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from src.errors import DegenerateMesh, EmptyMesh, ParseError
from src.state import TriangleMesh

logger = logging.getLogger(__name__)


def _read_text(path: Path) -> str:
    """Read a text file, trying UTF-8 then latin-1."""
    for encoding in ("utf-8", "latin-1"):
        try:
            return path.read_text(encoding=encoding)
        except UnicodeDecodeError:
            continue
    raise ParseError(f"Failed to decode {path}")


def _content_lines(text: str) -> List[str]:
    """Non-empty lines with '#' comments stripped."""
    lines = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append(line)
    return lines


def _parse_counts(tokens: List[str], path: Path) -> Tuple[int, int]:
    if len(tokens) < 2:
        raise ParseError(f"Missing vertex/face counts in {path}")
    try:
        n_vertices, n_faces = int(tokens[0]), int(tokens[1])
    except ValueError:
        raise ParseError(f"Non-numeric counts {tokens[:3]} in {path}")
    if n_vertices < 0 or n_faces < 0:
        raise ParseError(f"Negative counts {tokens[:2]} in {path}")
    return n_vertices, n_faces


def parse_off(text: str, path: Path = Path("<string>"), label: Optional[str] = None) -> TriangleMesh:
    """
    Parse OFF text into a triangle mesh.

    Args:
        text: File contents
        path: Source path, used in error messages only
        label: Optional category identifier

    Returns:
        TriangleMesh with fan-triangulated faces

    Raises:
        ParseError: Malformed header, counts, or non-numeric tokens
        EmptyMesh: The file declares zero faces
    """
    lines = _content_lines(text)
    if not lines or not lines[0].startswith("OFF"):
        raise ParseError(f"Missing OFF header in {path}")

    header_rest = lines[0][3:].split()
    if header_rest:
        # ModelNet quirk: "OFF490 518 0"
        n_vertices, n_faces = _parse_counts(header_rest, path)
        body = lines[1:]
    else:
        if len(lines) < 2:
            raise ParseError(f"Missing vertex/face counts in {path}")
        n_vertices, n_faces = _parse_counts(lines[1].split(), path)
        body = lines[2:]

    if n_faces == 0:
        raise EmptyMesh(f"Mesh has no faces: {path}")

    if len(body) != n_vertices + n_faces:
        raise ParseError(
            f"Header declares {n_vertices} vertices and {n_faces} faces "
            f"but {path} has {len(body)} data lines"
        )

    vertices = np.empty((n_vertices, 3), dtype=np.float64)
    for index, line in enumerate(body[:n_vertices]):
        tokens = line.split()
        if len(tokens) < 3:
            raise ParseError(f"Vertex {index} has fewer than 3 coordinates in {path}")
        try:
            vertices[index] = [float(t) for t in tokens[:3]]
        except ValueError:
            raise ParseError(f"Non-numeric vertex {index} in {path}: {line!r}")

    triangles: List[Tuple[int, int, int]] = []
    for index, line in enumerate(body[n_vertices:]):
        tokens = line.split()
        try:
            corner_count = int(tokens[0])
            corners = [int(t) for t in tokens[1:1 + corner_count]]
        except ValueError:
            raise ParseError(f"Non-numeric face {index} in {path}: {line!r}")
        if corner_count < 3 or len(corners) != corner_count:
            raise ParseError(f"Face {index} declares {corner_count} corners in {path}: {line!r}")
        if min(corners) < 0 or max(corners) >= n_vertices:
            raise ParseError(f"Face {index} references a vertex out of range in {path}")
        # fan split
        for a, b in zip(corners[1:-1], corners[2:]):
            triangles.append((corners[0], a, b))

    faces = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    return TriangleMesh(vertices=vertices, faces=faces, label=label)


def load_off(path, label: Optional[str] = None) -> TriangleMesh:
    """
    Load a triangle mesh from an OFF file.

    Args:
        path: Path to the .off file
        label: Optional category identifier

    Returns:
        TriangleMesh in model units

    Raises:
        ParseError: File missing, malformed header, count mismatch, bad tokens
        EmptyMesh: Zero faces
    """
    path = Path(path)
    if not path.is_file():
        raise ParseError(f"File not found: {path}")

    mesh = parse_off(_read_text(path), path=path, label=label)
    logger.debug(f"Loaded {path.name}: {len(mesh.vertices)} vertices, {len(mesh.faces)} triangles")
    return mesh


def write_off(mesh: TriangleMesh, path) -> Path:
    """Write a triangle mesh as a standard OFF file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    lines = ["OFF", f"{len(mesh.vertices)} {len(mesh.faces)} 0"]
    lines.extend(" ".join(repr(float(c)) for c in vertex) for vertex in mesh.vertices)
    lines.extend("3 " + " ".join(str(int(i)) for i in face) for face in mesh.faces)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _is_normalized(vertices: np.ndarray) -> bool:
    lo = vertices.min(axis=0)
    hi = vertices.max(axis=0)
    return bool(np.all(lo == -hi) and (hi - lo).max() == 1.0)


def normalize(mesh: TriangleMesh) -> TriangleMesh:
    """
    Center the bounding box at the origin and scale the longest axis to 1.0.

    Uniform scaling preserves the aspect ratio. The result's bounding box is
    exactly symmetric (min == -max per axis), which makes the operation
    idempotent bit for bit.

    Args:
        mesh: Non-empty mesh

    Returns:
        A new TriangleMesh (faces and label shared)

    Raises:
        EmptyMesh: Mesh has no vertices
        DegenerateMesh: Zero extent on all axes
    """
    if len(mesh.vertices) == 0 or len(mesh.faces) == 0:
        raise EmptyMesh("Cannot normalize an empty mesh")

    vertices = np.asarray(mesh.vertices, dtype=np.float64)
    if _is_normalized(vertices):
        return TriangleMesh(vertices=vertices.copy(), faces=mesh.faces, label=mesh.label)

    lo = vertices.min(axis=0)
    hi = vertices.max(axis=0)
    extent = float((hi - lo).max())
    if not extent > 0.0:
        raise DegenerateMesh(f"Mesh has zero extent on all axes (label={mesh.label})")

    center = 0.5 * (lo + hi)
    scaled = (vertices - center) / extent

    # Snap each axis to a symmetric box so min == -max exactly.
    half = np.minimum(0.5 * (scaled.max(axis=0) - scaled.min(axis=0)), 0.5)
    half[int(np.argmax(hi - lo))] = 0.5
    scaled = np.clip(scaled, -half, half)
    for axis in range(3):
        column = scaled[:, axis]
        column[column == column.min()] = -half[axis]
        column[column == column.max()] = half[axis]

    return TriangleMesh(vertices=scaled, faces=mesh.faces, label=mesh.label)
