"""
Output generation for pipeline artifacts.

This module writes the files a run leaves behind:
- Training log, evaluation and sweep CSVs (config hash in a leading comment line)
- Critical-sphere index lists
- Model statistics report (markdown)
- Sphere-set meshes for viewing (PLY or OBJ, one icosphere per sphere)

CSV files use '.' as the decimal separator and LF line endings, and contain no
timestamps, so reruns with the same seed are byte-identical.
"""

import csv
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import trimesh

from src.errors import UnsupportedFormat
from src.state import SphereSet, SphereSide

EXPORT_FORMATS = ("ply", "obj")

ICOSPHERE_SUBDIVISIONS = 2

SIDE_COLORS = {
    SphereSide.INTERIOR: (70, 130, 180, 255),
    SphereSide.EXTERIOR: (160, 160, 160, 255),
}
CRITICAL_COLOR = (220, 40, 40, 255)


def _default_path(output_dir: Optional[Path], stem: str, suffix: str) -> Path:
    timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    directory = Path(output_dir) if output_dir is not None else Path("outputs")
    directory.mkdir(parents=True, exist_ok=True)
    return directory / f"{stem}_{timestamp}.{suffix}"


def _write_csv(path: Path, config_hash: str, header: Sequence[str], rows: Sequence[Sequence[object]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as csvfile:
        csvfile.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(csvfile, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def _fmt(value: float) -> str:
    return f"{value:.6f}"


def read_csv_rows(path) -> List[Dict[str, str]]:
    """Read a CSV written by this module (skips the config hash comment)."""
    with open(path, newline="", encoding="utf-8") as csvfile:
        lines = [line for line in csvfile if not line.startswith("#")]
    return list(csv.DictReader(lines))


def read_config_hash(path) -> Optional[str]:
    """The config hash from the first line of a CSV written by this module."""
    with open(path, encoding="utf-8") as f:
        first = f.readline().strip()
    prefix = "# config_hash="
    return first[len(prefix):] if first.startswith(prefix) else None


# ============================================================================
# CSV outputs
# ============================================================================

def write_training_log(records, path, config_hash: str) -> Path:
    """
    Write the per-epoch training log.

    Args:
        records: EpochRecord sequence
        path: Destination CSV
        config_hash: Pipeline config hash

    Returns:
        Path to the CSV
    """
    rows = [
        [r.epoch, _fmt(r.train_loss), _fmt(r.train_acc), _fmt(r.test_acc)]
        for r in records
    ]
    return _write_csv(path, config_hash, ["epoch", "train_loss", "train_acc", "test_acc"], rows)


def write_evaluation(result, path, config_hash: str, split: str = "test") -> Path:
    """Overall accuracy row followed by one row per class."""
    rows = [["overall", split, result.correct, result.total, _fmt(result.overall)]]
    for class_name, accuracy in result.per_class.items():
        rows.append([class_name, split, "", "", _fmt(accuracy)])
    return _write_csv(path, config_hash, ["class", "split", "correct", "total", "accuracy"], rows)


def write_sweep(results: Sequence[tuple], path, config_hash: str) -> Path:
    """
    Accuracy versus sphere count.

    Args:
        results: (n, accuracy) pairs in sweep order
        path: Destination CSV
        config_hash: Pipeline config hash

    Returns:
        Path to the CSV; delta columns are relative to the first row
    """
    if not results:
        return _write_csv(path, config_hash, ["n", "accuracy", "delta"], [])
    base = results[0][1]
    rows = [[n, _fmt(accuracy), _fmt(accuracy - base)] for n, accuracy in results]
    return _write_csv(path, config_hash, ["n", "accuracy", "delta"], rows)


def sweep_trend(results: Sequence[tuple]) -> str:
    """'non-increasing' when accuracy never rises as n shrinks, else 'mixed'."""
    ordered = sorted(results, key=lambda item: -item[0])
    accuracies = [accuracy for _, accuracy in ordered]
    if all(a >= b for a, b in zip(accuracies, accuracies[1:])):
        return "non-increasing"
    return "mixed"


def write_critical(critical: Dict[str, np.ndarray], path, config_hash: str) -> Path:
    """One row per object: source, critical count, space-separated indices."""
    rows = [
        [name, len(indices), " ".join(str(int(i)) for i in indices)]
        for name, indices in critical.items()
    ]
    return _write_csv(path, config_hash, ["object", "critical_count", "indices"], rows)


# ============================================================================
# Statistics report
# ============================================================================

def generate_stats_report(comparison: Dict[str, object], notes: Sequence[str] = (), output_path=None) -> str:
    """
    Markdown report of parameter and FLOP counts for every preset.

    Args:
        comparison: name → StatsComparison (from compare_presets)
        notes: Extra lines appended under "Notes"
        output_path: Optional destination (defaults to outputs/model_stats_<timestamp>.md)

    Returns:
        Path to the generated report
    """
    if output_path is None:
        output_path = _default_path(None, "model_stats", "md")

    lines = ["# Model Statistics", ""]
    lines.append(f"**Generated:** {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
    lines.append("")
    lines.append("| Network | n | Parameters | Running stats | FLOPs | Params ratio | FLOPs ratio |")
    lines.append("|---|---|---|---|---|---|---|")
    for name, item in comparison.items():
        stats = item.stats
        lines.append(
            f"| {name} | {stats.n} | {stats.params:,} | {stats.running_stats:,} | {stats.flops:,} "
            f"| {item.param_ratio:.3f} | {item.flop_ratio:.3f} |"
        )
    lines.append("")

    for name, item in comparison.items():
        lines.append(f"## {name}")
        lines.append("")
        for layer in item.stats.layers:
            lines.append(f"- {layer.name}: {layer.params:,} params, {layer.flops:,} FLOPs")
        lines.append("")

    if notes:
        lines.append("## Notes")
        lines.append("")
        lines.extend(f"- {note}" for note in notes)
        lines.append("")

    Path(output_path).parent.mkdir(parents=True, exist_ok=True)
    Path(output_path).write_text("\n".join(lines), encoding="utf-8")
    return str(output_path)


# ============================================================================
# Mesh export
# ============================================================================

def sphere_mesh(
    sphere_set: SphereSet,
    critical: Optional[Sequence[int]] = None,
    subdivisions: int = ICOSPHERE_SUBDIVISIONS,
) -> trimesh.Trimesh:
    """
    One icosphere per sphere in normalized coordinates.

    Centers map to ((i + 0.5) / R - 0.5, ...), radii to r / R. Spheres listed in
    critical are colored CRITICAL_COLOR, the rest by side.
    """
    template = trimesh.creation.icosphere(subdivisions=subdivisions)
    unit_vertices = np.asarray(template.vertices)
    unit_faces = np.asarray(template.faces)
    resolution = float(sphere_set.resolution)
    highlighted = set(int(i) for i in (critical if critical is not None else []))

    vertices, faces, colors = [], [], []
    for index, sphere in enumerate(sphere_set.spheres):
        center = (np.asarray(sphere.center, dtype=np.float64) + 0.5) / resolution - 0.5
        vertices.append(unit_vertices * (sphere.radius / resolution) + center)
        faces.append(unit_faces + index * len(unit_vertices))
        color = CRITICAL_COLOR if index in highlighted else SIDE_COLORS[sphere.side]
        colors.append(np.tile(color, (len(unit_vertices), 1)))

    if not vertices:
        return trimesh.Trimesh(vertices=np.zeros((0, 3)), faces=np.zeros((0, 3), dtype=np.int64), process=False)
    return trimesh.Trimesh(
        vertices=np.concatenate(vertices),
        faces=np.concatenate(faces),
        vertex_colors=np.concatenate(colors).astype(np.uint8),
        process=False,
    )


def export_spheres(
    sphere_set: SphereSet,
    path,
    fmt: Optional[str] = None,
    critical: Optional[Sequence[int]] = None,
    subdivisions: int = ICOSPHERE_SUBDIVISIONS,
) -> Path:
    """
    Write a sphere set as a viewable mesh.

    Args:
        sphere_set: Spheres to export
        path: Destination file
        fmt: ply or obj (defaults to the path suffix)
        critical: Sphere indices drawn in the highlight color
        subdivisions: Icosphere subdivision level

    Returns:
        The written path

    Raises:
        UnsupportedFormat: Anything other than ply or obj
    """
    path = Path(path)
    fmt = (fmt or path.suffix.lstrip(".")).lower()
    if fmt not in EXPORT_FORMATS:
        raise UnsupportedFormat(f"Unsupported export format '{fmt}', use one of {', '.join(EXPORT_FORMATS)}")

    path.parent.mkdir(parents=True, exist_ok=True)
    mesh = sphere_mesh(sphere_set, critical, subdivisions)
    mesh.export(str(path), file_type=fmt)
    return path
