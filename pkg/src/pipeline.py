"""
Per-object pipeline: OFF mesh → normalized mesh → voxel grid → SDF → spheres.

Each stage runs through _run_stage, which times it and logs the outcome, so a
finished ObjectResult carries a timing breakdown the CLI can display.
"""

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Optional

import numpy as np

from config.pipeline_config import PipelineConfig
from src.errors import InSphereError, InvariantViolation
from src.geometry.mesh_io import load_off, normalize
from src.geometry.sdf import brute_force_sdf, compute_sdf
from src.geometry.spheres import build_mixed, build_spheres, reference_greedy
from src.geometry.voxel import voxelize_solid
from src.state import SdfGrid, SphereSet, SphereSide, TriangleMesh, VoxelGrid

logger = logging.getLogger(__name__)

STAGES = ("load", "normalize", "voxelize", "sdf", "spheres")
"""Pipeline stages in execution order; timing breakdowns are reported in this order"""


@dataclass
class ObjectResult:
    """Every intermediate artifact of one processed mesh."""

    path: Path
    mesh: TriangleMesh
    grid: VoxelGrid
    sdf: SdfGrid
    spheres: SphereSet
    timing_breakdown: Dict[str, float] = field(default_factory=dict)

    @property
    def total_seconds(self) -> float:
        return sum(self.timing_breakdown.values())


def _run_stage(name: str, func: Callable[..., Any], timing: Dict[str, float], *args, **kwargs) -> Any:
    """Run one stage, recording its duration even when it fails."""
    if name not in STAGES:
        raise InvariantViolation(f"Unknown pipeline stage '{name}'")
    start = time.perf_counter()
    try:
        return func(*args, **kwargs)
    except InSphereError as e:
        logger.debug(f"Stage '{name}' failed: {e}")
        raise
    finally:
        timing[name] = time.perf_counter() - start


def ordered_timing(timing: Dict[str, float]) -> Dict[str, float]:
    """Stage timings in STAGES order, skipping stages that did not run."""
    return {name: timing[name] for name in STAGES if name in timing}


def build_sphere_set(sdf: SdfGrid, config: PipelineConfig) -> SphereSet:
    """Dispatch to the single-side or mixed builder according to config.side."""
    if config.side == SphereSide.MIXED:
        return build_mixed(
            sdf,
            config.n_interior,
            config.n_exterior,
            d_schedule=config.d_schedule,
            scale_d=config.scale_d,
            tolerance=config.contact_tolerance,
        )
    return build_spheres(
        sdf,
        config.side,
        config.n_spheres,
        d_schedule=config.d_schedule,
        scale_d=config.scale_d,
        tolerance=config.contact_tolerance,
    )


def load_grid(path, config: PipelineConfig, label: Optional[str] = None,
              timing: Optional[Dict[str, float]] = None):
    """Load, normalize and voxelize one mesh. Returns (normalized mesh, grid)."""
    timing = timing if timing is not None else {}
    mesh = _run_stage("load", load_off, timing, path, label=label)
    mesh = _run_stage("normalize", normalize, timing, mesh)
    grid = _run_stage("voxelize", voxelize_solid, timing, mesh, config.resolution)
    return mesh, grid


def load_sdf_grid(path, config: PipelineConfig, label: Optional[str] = None,
                  timing: Optional[Dict[str, float]] = None):
    """load_grid followed by the SDF stage. Returns (grid, sdf)."""
    timing = timing if timing is not None else {}
    _, grid = load_grid(path, config, label=label, timing=timing)
    return grid, _run_stage("sdf", compute_sdf, timing, grid)


def process_mesh(path, config: PipelineConfig, label: Optional[str] = None) -> ObjectResult:
    """
    Run the full geometry pipeline on one OFF file.

    Args:
        path: OFF file
        config: Pipeline settings (resolution, side, sphere count, schedule)
        label: Optional class name carried on the mesh

    Returns:
        ObjectResult with artifacts and per-stage timings

    Raises:
        InSphereError: Any stage failure, unchanged
    """
    path = Path(path)
    timing: Dict[str, float] = {}
    mesh, grid = load_grid(path, config, label=label, timing=timing)
    sdf = _run_stage("sdf", compute_sdf, timing, grid)
    spheres = _run_stage("spheres", build_sphere_set, timing, sdf, config)

    result = ObjectResult(path=path, mesh=mesh, grid=grid, sdf=sdf, spheres=spheres,
                          timing_breakdown=ordered_timing(timing))
    logger.info(
        f"{path.name}: {grid.occupied_count} occupied voxels at {config.resolution}³, "
        f"{len(spheres)} {config.side.value} spheres ({result.total_seconds:.2f}s)"
    )
    return result


# ============================================================================
# Oracle verification
# ============================================================================

def verify_mesh(path, config: PipelineConfig) -> Dict[str, Any]:
    """
    Cross-check the fast kernels against the brute-force references on one mesh.

    Compares compute_sdf with brute_force_sdf (exact squared distances) and
    build_spheres with reference_greedy (element-wise) on each requested side.

    Returns:
        Dict of check name → bool, plus sphere counts

    Raises:
        ResolutionTooLarge: config.resolution above the brute-force limit
    """
    _, grid = load_grid(path, config)
    fast = compute_sdf(grid)
    slow = brute_force_sdf(grid)
    report: Dict[str, Any] = {
        "resolution": config.resolution,
        "sdf_exact": bool(np.array_equal(fast.squared, slow.squared)),
    }

    sides = [SphereSide.INTERIOR, SphereSide.EXTERIOR] if config.side == SphereSide.MIXED else [config.side]
    for side in sides:
        n = config.n_interior if side == SphereSide.INTERIOR else config.n_exterior
        n = n or config.n_spheres
        built = build_spheres(fast, side, n, config.d_schedule, config.scale_d, config.contact_tolerance)
        oracle = reference_greedy(fast, side, n, config.d_schedule, config.scale_d, config.contact_tolerance)
        report[f"{side.value}_count"] = len(built)
        report[f"{side.value}_greedy_exact"] = built.spheres == oracle
    return report


def require_verified(report: Dict[str, Any]) -> None:
    """Raise InvariantViolation when any boolean check in a verify report failed."""
    failed = [name for name, value in report.items() if isinstance(value, bool) and not value]
    if failed:
        raise InvariantViolation(f"Oracle mismatch: {', '.join(failed)}")

