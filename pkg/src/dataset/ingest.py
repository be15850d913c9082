"""
Batch conversion of a ModelNet-style tree into cached sphere sets.

Expected layout:

    root/<class>/train/*.off
    root/<class>/test/*.off

Caches land in <cache root>/<root name>/<class>/<split>/<stem>.isph and are
indexed by a manifest. Existing caches whose header carries the current config
hash are reused, so an interrupted ingest resumes where it stopped.
"""

import logging
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Tuple

from config.pipeline_config import PipelineConfig
from src.dataset.manifest import MANIFEST_NAME, DatasetManifest, ManifestEntry, ManifestHeader
from src.errors import CacheCorrupt, ConfigMismatch, DataError, EmptyDataset
from src.geometry.grid_io import read_sphere_header, save_spheres
from src.pipeline import process_mesh
from src.state import Split

logger = logging.getLogger(__name__)


@dataclass
class SourceItem:
    """One mesh found under the dataset root."""

    source: Path
    class_name: str
    split: Split
    cache_path: Path  # relative to the dataset cache directory


@dataclass
class IngestStats:
    """Outcome counts of one ingest run."""

    total: int = 0
    converted: int = 0
    cached: int = 0
    failed: int = 0
    short: int = 0
    failures: List[Tuple[str, str]] = field(default_factory=list)


# ============================================================================
# Discovery
# ============================================================================

def discover(root) -> Tuple[List[str], List[SourceItem]]:
    """
    List classes and OFF files under a dataset root.

    Args:
        root: Directory with <class>/{train,test}/*.off

    Returns:
        (sorted class names, items sorted by class, split, file name)

    Raises:
        EmptyDataset: Missing root, fewer than 2 classes, or no OFF files
    """
    root = Path(root)
    if not root.is_dir():
        raise EmptyDataset(f"Dataset root not found: {root}")

    classes = sorted(
        child.name for child in root.iterdir()
        if child.is_dir() and any((child / split.value).is_dir() for split in Split)
    )
    if len(classes) < 2:
        raise EmptyDataset(f"{root} holds {len(classes)} class directories, need at least 2")

    items: List[SourceItem] = []
    for class_name in classes:
        for split in Split:
            split_dir = root / class_name / split.value
            if not split_dir.is_dir():
                continue
            for source in sorted(split_dir.glob("*.off")):
                items.append(SourceItem(
                    source=source,
                    class_name=class_name,
                    split=split,
                    cache_path=Path(class_name) / split.value / f"{source.stem}.isph",
                ))

    if not items:
        raise EmptyDataset(f"No OFF files under {root}")
    return classes, items


def dataset_cache_dir(root, config: PipelineConfig) -> Path:
    """Cache directory for one dataset root."""
    return config.effective_cache_dir() / Path(root).resolve().name


# ============================================================================
# Conversion
# ============================================================================

def _is_current(cache_file: Path, config: PipelineConfig) -> Optional[int]:
    """Sphere count of a valid cache built under this config, else None."""
    if not cache_file.is_file():
        return None
    try:
        resolution, side, count, n_requested, _, tag = read_sphere_header(cache_file)
    except CacheCorrupt:
        return None
    if tag != config.hash_tag() or resolution != config.resolution or side != config.side:
        return None
    return count


def convert_one(source: Path, class_name: str, cache_file: Path, config: PipelineConfig) -> Tuple[str, int, str]:
    """
    Build and cache the spheres of one mesh.

    Module-level so worker processes can pickle it. Data errors are returned
    as a "failed" status instead of raised.

    Returns:
        (status, sphere count, message) with status "converted" or "failed"
    """
    try:
        result = process_mesh(source, config, label=class_name)
    except DataError as e:
        return "failed", 0, f"{type(e).__name__}: {e}"
    save_spheres(result.spheres, cache_file, config_tag=config.hash_tag())
    return "converted", len(result.spheres), ""


def _check_existing_manifest(cache_dir: Path, config: PipelineConfig, force: bool) -> None:
    manifest_file = cache_dir / MANIFEST_NAME
    if not manifest_file.is_file():
        return
    try:
        existing = DatasetManifest.load(manifest_file)
    except CacheCorrupt:
        logger.warning(f"Ignoring unreadable manifest {manifest_file}")
        return
    if existing.config_hash == config.config_hash():
        return
    if not force:
        raise ConfigMismatch(
            f"{cache_dir} was built with config {existing.config_hash}, "
            f"current config is {config.config_hash()} (use --force to rebuild)"
        )
    logger.warning(f"Removing caches of config {existing.config_hash} in {cache_dir}")
    shutil.rmtree(cache_dir)


def ingest_with_stats(
    root,
    config: PipelineConfig,
    force: bool = False,
    progress: Optional[Callable[[SourceItem, str], None]] = None,
) -> Tuple[DatasetManifest, IngestStats]:
    """
    Convert every mesh under root and write the manifest.

    Args:
        root: Dataset root
        config: Pipeline settings; config.workers > 1 converts in parallel
        force: Replace caches built under a different config
        progress: Called with (item, status) after each mesh

    Returns:
        (manifest, stats)

    Raises:
        EmptyDataset: Nothing to ingest, or no mesh converted successfully
        ConfigMismatch: Existing caches belong to another config and force is off
    """
    classes, items = discover(root)
    cache_dir = dataset_cache_dir(root, config)
    _check_existing_manifest(cache_dir, config, force)
    cache_dir.mkdir(parents=True, exist_ok=True)

    stats = IngestStats(total=len(items))
    counts: List[Optional[int]] = [None] * len(items)

    pending = []
    for index, item in enumerate(items):
        count = _is_current(cache_dir / item.cache_path, config)
        if count is not None:
            counts[index] = count
            stats.cached += 1
            if progress:
                progress(item, "cached")
        else:
            pending.append(index)

    logger.info(
        f"Ingesting {root}: {len(items)} meshes, {stats.cached} cached, {len(pending)} to convert "
        f"(config {config.config_hash()})"
    )

    def record(index: int, outcome: Tuple[str, int, str]) -> None:
        status, count, message = outcome
        item = items[index]
        if status == "converted":
            counts[index] = count
            stats.converted += 1
        else:
            stats.failed += 1
            stats.failures.append((str(item.source), message))
            logger.warning(f"Skipping {item.source}: {message}")
        if progress:
            progress(item, status)

    jobs = [(items[i].source, items[i].class_name, cache_dir / items[i].cache_path, config) for i in pending]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            # map preserves submission order, so records stay sorted
            for index, outcome in zip(pending, pool.map(convert_one, *zip(*jobs))):
                record(index, outcome)
    else:
        for index, job in zip(pending, jobs):
            record(index, convert_one(*job))

    label_of = {name: label for label, name in enumerate(classes)}
    entries = []
    for item, count in zip(items, counts):
        if count is None:
            continue
        if count < config.n_spheres:
            stats.short += 1
        entries.append(ManifestEntry(
            cache_path=item.cache_path.as_posix(),
            source=str(item.source),
            split=item.split,
            class_name=item.class_name,
            label=label_of[item.class_name],
            side=config.side,
            n=config.n_spheres,
            count=count,
            resolution=config.resolution,
        ))
    if not entries:
        raise EmptyDataset(f"No mesh under {root} could be converted")

    header = ManifestHeader(
        config_hash=config.config_hash(),
        resolution=config.resolution,
        n_spheres=config.n_spheres,
        side=config.side,
        d_schedule=config.d_schedule,
        classes=classes,
    )
    manifest = DatasetManifest(header=header, entries=entries, root=cache_dir)
    manifest.save()
    logger.info(
        f"Manifest {manifest.default_path()}: {len(entries)} entries "
        f"({stats.converted} converted, {stats.cached} cached, {stats.failed} failed)"
    )
    return manifest, stats


def ingest(root, config: PipelineConfig, force: bool = False) -> DatasetManifest:
    """Convert a dataset root into cached sphere sets; see ingest_with_stats."""
    manifest, _ = ingest_with_stats(root, config, force=force)
    return manifest
