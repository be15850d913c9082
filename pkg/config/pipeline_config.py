"""
Pipeline configuration: geometry, sphere construction, network choice and paths.

A config file is a plain KEY=VALUE text file (dotenv syntax), e.g.:

    RESOLUTION=64
    N_SPHERES=64
    SIDE=interior
    D_SCHEDULE=10,5,0
    NET=t2-256
    SEED=0

Environment variables (INSPHERE_*) override paths and the voxel memory cap.
"""

import hashlib
import os
from pathlib import Path
from typing import Dict, List, Optional

from dotenv import dotenv_values, load_dotenv
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from config.net_config import DEFAULT_NET, NET_PRESETS
from src.errors import UserError
from src.state import SphereSide

load_dotenv()


DEFAULT_D_SCHEDULE = [10.0, 5.0, 0.0]
"""Separation thresholds at the reference resolution"""

REFERENCE_RESOLUTION = 512
"""Resolution the separation schedule is expressed at"""

DEFAULT_MAX_VOXELS = 512 ** 3

HASHED_FIELDS = (
    "resolution",
    "n_spheres",
    "side",
    "d_schedule",
    "scale_d",
    "contact_tolerance",
)
"""Fields that change cached geometry; they make up config_hash()"""


class PathSettings:
    """Filesystem locations, overridable from the environment."""

    CACHE_DIR = Path(os.getenv("INSPHERE_CACHE_DIR", "data/cache"))
    OUTPUT_DIR = Path(os.getenv("INSPHERE_OUTPUT_DIR", "outputs"))
    RUN_DB = Path(os.getenv("INSPHERE_RUN_DB", "data/run_history.db"))
    MAX_VOXELS = int(os.getenv("INSPHERE_MAX_VOXELS", str(DEFAULT_MAX_VOXELS)))

    @classmethod
    def cache_dir(cls) -> Path:
        """Cache root, re-read so tests and the CLI can set the variable late."""
        return Path(os.getenv("INSPHERE_CACHE_DIR", str(cls.CACHE_DIR)))

    @classmethod
    def output_dir(cls) -> Path:
        return Path(os.getenv("INSPHERE_OUTPUT_DIR", str(cls.OUTPUT_DIR)))

    @classmethod
    def run_db(cls) -> Path:
        return Path(os.getenv("INSPHERE_RUN_DB", str(cls.RUN_DB)))

    @classmethod
    def max_voxels(cls) -> int:
        return int(os.getenv("INSPHERE_MAX_VOXELS", str(cls.MAX_VOXELS)))


class PipelineConfig(BaseModel):
    """All settings needed to reproduce a pipeline run."""

    resolution: int = Field(64, ge=8, description="Voxel grid resolution R")
    n_spheres: int = Field(64, ge=1, description="Spheres per object (split evenly when mixed)")
    side: SphereSide = Field(SphereSide.INTERIOR, description="interior, exterior or mixed")
    d_schedule: List[float] = Field(
        default_factory=lambda: list(DEFAULT_D_SCHEDULE),
        description="Separation thresholds at 512³, strictly decreasing, ending at 0",
    )
    scale_d: bool = Field(True, description="Scale d_schedule by R/512")
    contact_tolerance: float = Field(0.5, gt=0.0, description="Contact band in voxels")
    net: str = Field(DEFAULT_NET, description="Network preset")
    seed: int = Field(0, description="Seed for init, shuffling, augmentation, dropout")
    epochs: int = Field(100, ge=1)
    batch_size: int = Field(32, ge=2)
    learning_rate: float = Field(1e-3, gt=0.0)
    workers: int = Field(1, ge=1, description="Parallel ingestion processes")
    dataset_root: Optional[Path] = Field(None, description="ModelNet-style class/split/*.off tree")
    cache_dir: Optional[Path] = Field(None, description="Overrides INSPHERE_CACHE_DIR")
    output_dir: Optional[Path] = Field(None, description="Overrides INSPHERE_OUTPUT_DIR")

    @field_validator("d_schedule", mode="before")
    @classmethod
    def parse_schedule(cls, v):
        if isinstance(v, str):
            v = [item for item in v.replace(" ", "").split(",") if item]
        return [float(item) for item in v]

    @field_validator("d_schedule")
    @classmethod
    def validate_schedule(cls, v: List[float]) -> List[float]:
        """Strictly decreasing and ending at 0."""
        if not v:
            raise ValueError("d_schedule cannot be empty")
        if v[-1] != 0.0:
            raise ValueError(f"d_schedule must end at 0, got: {v}")
        if any(a <= b for a, b in zip(v, v[1:])):
            raise ValueError(f"d_schedule must be strictly decreasing, got: {v}")
        return v

    @field_validator("net")
    @classmethod
    def validate_net(cls, v: str) -> str:
        if v not in NET_PRESETS:
            raise ValueError(f"Unknown network '{v}'. Available: {', '.join(sorted(NET_PRESETS))}")
        return v

    @model_validator(mode="after")
    def validate_mixed_count(self) -> "PipelineConfig":
        if self.side == SphereSide.MIXED and self.n_spheres < 2:
            raise ValueError("mixed side needs n_spheres >= 2")
        return self

    # ------------------------------------------------------------------
    # Derived values
    # ------------------------------------------------------------------

    @property
    def n_interior(self) -> int:
        if self.side == SphereSide.INTERIOR:
            return self.n_spheres
        if self.side == SphereSide.EXTERIOR:
            return 0
        return self.n_spheres - self.n_spheres // 2

    @property
    def n_exterior(self) -> int:
        return self.n_spheres - self.n_interior

    def effective_cache_dir(self) -> Path:
        return self.cache_dir if self.cache_dir is not None else PathSettings.cache_dir()

    def effective_output_dir(self) -> Path:
        return self.output_dir if self.output_dir is not None else PathSettings.output_dir()

    def config_hash(self) -> str:
        """16-hex-digit SHA-256 over the geometry-affecting fields."""
        payload = "|".join(f"{name}={self._hash_value(name)}" for name in HASHED_FIELDS)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]

    def hash_tag(self) -> int:
        """config_hash() as an unsigned 64-bit integer for binary headers."""
        return int(self.config_hash(), 16)

    def _hash_value(self, name: str) -> str:
        value = getattr(self, name)
        if isinstance(value, SphereSide):
            return value.value
        if isinstance(value, list):
            return ",".join(repr(float(item)) for item in value)
        return repr(value)


# ============================================================================
# File I/O
# ============================================================================

def load_config(path: Path, overrides: Optional[Dict[str, object]] = None) -> PipelineConfig:
    """
    Load a KEY=VALUE config file and apply overrides.

    Args:
        path: Config file path (None values in overrides are ignored)
        overrides: Field values taking precedence over the file

    Returns:
        Validated PipelineConfig

    Raises:
        UserError: If the file is missing or a value is invalid
    """
    path = Path(path)
    if not path.is_file():
        raise UserError(f"Config file not found: {path}")

    raw = dotenv_values(path)
    values: Dict[str, object] = {
        key.strip().lower(): value
        for key, value in raw.items()
        if value is not None and value != ""
    }
    return build_config(values, overrides)


def build_config(
    values: Optional[Dict[str, object]] = None,
    overrides: Optional[Dict[str, object]] = None,
) -> PipelineConfig:
    """Validate a dict of settings into a PipelineConfig, raising UserError on failure."""
    merged: Dict[str, object] = dict(values or {})
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value

    unknown = sorted(set(merged) - set(PipelineConfig.model_fields))
    if unknown:
        raise UserError(f"Unknown config keys: {', '.join(unknown)}")

    try:
        return PipelineConfig(**merged)
    except ValidationError as e:
        raise UserError(f"Invalid configuration: {e}") from e


def save_config(config: PipelineConfig, path: Path) -> Path:
    """
    Write a config as KEY=VALUE lines (round-trips through load_config).

    Args:
        config: Configuration to save
        path: Destination file

    Returns:
        The written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    lines = [f"# config_hash={config.config_hash()}"]
    for name in PipelineConfig.model_fields:
        value = getattr(config, name)
        if value is None:
            continue
        if isinstance(value, SphereSide):
            value = value.value
        elif isinstance(value, list):
            value = ",".join(f"{item:g}" for item in value)
        lines.append(f"{name.upper()}={value}")

    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
