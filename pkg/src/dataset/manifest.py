"""
Dataset manifest: class names, per-sample cache entries and the config hash.

Stored as JSON lines next to the sphere caches. The first line is the header
(config hash, geometry settings, class names), every further line is one
ManifestEntry.
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, ValidationError, field_validator

from src.errors import CacheCorrupt, EmptyDataset
from src.state import SphereSide, Split

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.jsonl"


class ManifestEntry(BaseModel):
    """One cached object."""

    cache_path: str = Field(..., description="Sphere cache path, relative to the manifest directory")
    source: str = Field(..., description="OFF file the spheres were built from")
    split: Split
    class_name: str
    label: int = Field(..., ge=0)
    side: SphereSide
    n: int = Field(..., ge=1, description="Spheres requested")
    count: int = Field(..., ge=0, description="Spheres actually built")
    resolution: int = Field(..., ge=8)

    @property
    def padded(self) -> bool:
        return self.count < self.n


class ManifestHeader(BaseModel):
    """First line of the manifest file."""

    config_hash: str = Field(..., min_length=16, max_length=16)
    resolution: int
    n_spheres: int
    side: SphereSide
    d_schedule: List[float]
    classes: List[str]

    @field_validator("classes")
    @classmethod
    def validate_classes(cls, v: List[str]) -> List[str]:
        if len(v) < 2:
            raise ValueError(f"A dataset needs at least 2 classes, got {len(v)}")
        if v != sorted(v):
            raise ValueError("Class names must be sorted (index = label)")
        return v


class DatasetManifest(BaseModel):
    """Cached dataset: header plus entries, bound to one pipeline config hash."""

    header: ManifestHeader
    entries: List[ManifestEntry] = Field(default_factory=list)
    root: Optional[Path] = Field(None, description="Directory holding the manifest and caches")

    @property
    def config_hash(self) -> str:
        return self.header.config_hash

    @property
    def classes(self) -> List[str]:
        return self.header.classes

    @property
    def k(self) -> int:
        return len(self.header.classes)

    def split_entries(self, split: Split) -> List[ManifestEntry]:
        """Entries of one split in manifest order."""
        return [entry for entry in self.entries if entry.split == split]

    def counts(self) -> Dict[str, Dict[str, int]]:
        """class name → split → sample count."""
        table: Dict[str, Dict[str, int]] = {name: {s.value: 0 for s in Split} for name in self.classes}
        for entry in self.entries:
            table[entry.class_name][entry.split.value] += 1
        return table

    def cache_file(self, entry: ManifestEntry) -> Path:
        base = self.root if self.root is not None else Path(".")
        return base / entry.cache_path

    # ------------------------------------------------------------------
    # Persistence
    # ------------------------------------------------------------------

    def save(self, path: Optional[Path] = None) -> Path:
        """Write the manifest as JSON lines (header first)."""
        path = Path(path) if path is not None else self.default_path()
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [self.header.model_dump_json()]
        lines.extend(entry.model_dump_json() for entry in self.entries)
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
        tmp.replace(path)
        return path

    def default_path(self) -> Path:
        if self.root is None:
            raise EmptyDataset("Manifest has no root directory")
        return self.root / MANIFEST_NAME

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        """
        Read a manifest written by save().

        Args:
            path: Manifest file, or the directory containing manifest.jsonl

        Raises:
            CacheCorrupt: File missing or unparseable
        """
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_NAME
        if not path.is_file():
            raise CacheCorrupt(f"Manifest not found: {path}")

        lines = [line for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
        if not lines:
            raise CacheCorrupt(f"Empty manifest: {path}")
        try:
            header = ManifestHeader.model_validate(json.loads(lines[0]))
            entries = [ManifestEntry.model_validate(json.loads(line)) for line in lines[1:]]
        except (ValueError, ValidationError) as e:
            raise CacheCorrupt(f"Malformed manifest {path}: {e}") from e

        logger.debug(f"Loaded manifest {path}: {len(entries)} entries, {len(header.classes)} classes")
        return cls(header=header, entries=entries, root=path.parent)
