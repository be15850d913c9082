"""
Sphere caches → normalized network inputs.

Features per sphere are (x, y, z, r): the voxel center mapped to [-1, 1]³ and
the radius divided by R/2. Objects with fewer spheres than requested are
padded by repeating the last row.
"""

import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.dataset.manifest import DatasetManifest, ManifestEntry
from src.errors import CacheCorrupt, EmptyDataset, UserError
from src.geometry.grid_io import load_spheres
from src.state import SphereSample, SphereSet, Split

logger = logging.getLogger(__name__)

JITTER_SIGMA = 0.01
JITTER_CLIP = 0.05


def sphere_features(sphere_set: SphereSet) -> np.ndarray:
    """(count, 4) float32 features of a sphere set in construction order."""
    resolution = sphere_set.resolution
    if len(sphere_set) == 0:
        return np.zeros((0, 4), dtype=np.float32)
    centers = (2 * sphere_set.centers() + 1 - resolution) / float(resolution)
    radii = np.clip(sphere_set.radii() / (resolution / 2.0), 0.0, 1.0)
    return np.column_stack([centers, radii]).astype(np.float32)


def to_sample(sphere_set: SphereSet, label: int, n: Optional[int] = None) -> SphereSample:
    """
    Build a fixed-size network sample from a sphere set.

    Args:
        sphere_set: Cached spheres (construction order)
        label: Class index
        n: Rows wanted; a longer set is prefix-truncated, a shorter one padded

    Raises:
        CacheCorrupt: The set is empty, so there is no row to repeat
    """
    n = n if n is not None else sphere_set.n_requested
    features = sphere_features(sphere_set.truncated(n))
    if len(features) == 0:
        raise CacheCorrupt("Cannot build a sample from an empty sphere set")
    padded = len(features) < n
    if padded:
        fill = np.repeat(features[-1:], n - len(features), axis=0)
        features = np.concatenate([features, fill], axis=0)
    return SphereSample(features=features, label=label, padded=padded)


def augment(
    features: np.ndarray,
    rng: np.random.Generator,
    sigma: float = JITTER_SIGMA,
    clip: float = JITTER_CLIP,
) -> np.ndarray:
    """
    Random rotation about the up (y) axis plus clipped Gaussian jitter on centers.

    Radii are left untouched.
    """
    angle = rng.uniform(0.0, 2.0 * np.pi)
    c, s = np.cos(angle), np.sin(angle)
    rotation = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])

    centers = features[:, :3].astype(np.float64) @ rotation.T
    centers += np.clip(sigma * rng.standard_normal(centers.shape), -clip, clip)

    out = features.copy()
    out[:, :3] = np.clip(centers, -1.0, 1.0)
    return out


def collate(samples: Sequence[SphereSample]) -> Tuple[np.ndarray, np.ndarray]:
    """Stack samples into (B, n, 4) float32 features and (B,) int64 labels."""
    if not samples:
        raise UserError("Cannot collate an empty batch")
    features = np.stack([sample.features for sample in samples]).astype(np.float32)
    labels = np.array([sample.label for sample in samples], dtype=np.int64)
    return features, labels


# ============================================================================
# Manifest access
# ============================================================================

def load_sphere_set(manifest: DatasetManifest, entry: ManifestEntry) -> SphereSet:
    """Read one cached sphere set, checking it against the manifest's config hash."""
    return load_spheres(manifest.cache_file(entry), expected_tag=int(manifest.config_hash, 16))


def load_batch(
    manifest: DatasetManifest,
    split: Split,
    indices: Sequence[int],
    n: Optional[int] = None,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> List[SphereSample]:
    """
    Load samples of one split by index.

    Args:
        manifest: Dataset manifest
        split: train or test
        indices: Positions within the split
        n: Rows per sample (defaults to the manifest's sphere count)
        training: Apply augmentation
        rng: Random generator for augmentation (required when training)

    Raises:
        UserError: Index out of range, or training without an rng
        CacheCorrupt: A cache file is missing or stale
    """
    entries = manifest.split_entries(split)
    n = n if n is not None else manifest.header.n_spheres
    if training and rng is None:
        raise UserError("Augmented loading needs a random generator")

    samples = []
    for index in indices:
        if not 0 <= index < len(entries):
            raise UserError(f"Index {index} outside the {split.value} split ({len(entries)} samples)")
        entry = entries[index]
        sample = to_sample(load_sphere_set(manifest, entry), entry.label, n)
        if training:
            sample = SphereSample(features=augment(sample.features, rng), label=sample.label, padded=sample.padded)
        samples.append(sample)
    return samples


class SphereDataset:
    """
    One split held in memory for repeated epochs.

    Sphere sets are read once; samples are rebuilt per request so prefix
    truncation and augmentation stay cheap.
    """

    def __init__(self, manifest: DatasetManifest, split: Split, n: Optional[int] = None):
        self.manifest = manifest
        self.split = split
        self.n = n if n is not None else manifest.header.n_spheres
        self.entries = manifest.split_entries(split)
        if not self.entries:
            raise EmptyDataset(f"The {split.value} split of {manifest.root} is empty")
        self._samples: Dict[int, SphereSample] = {}

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def labels(self) -> np.ndarray:
        return np.array([entry.label for entry in self.entries], dtype=np.int64)

    def sample(self, index: int) -> SphereSample:
        if index not in self._samples:
            entry = self.entries[index]
            self._samples[index] = to_sample(load_sphere_set(self.manifest, entry), entry.label, self.n)
        return self._samples[index]

    def batch(
        self,
        indices: Sequence[int],
        rng: Optional[np.random.Generator] = None,
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Collated (features, labels); augmented when rng is given."""
        samples = [self.sample(int(i)) for i in indices]
        if rng is not None:
            samples = [
                SphereSample(features=augment(s.features, rng), label=s.label, padded=s.padded)
                for s in samples
            ]
        return collate(samples)

    def with_count(self, n: int) -> "SphereDataset":
        """Same split with samples truncated (or padded) to n rows."""
        return SphereDataset(self.manifest, self.split, n)
