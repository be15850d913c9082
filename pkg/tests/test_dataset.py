"""
Tests for dataset ingestion, the manifest and the sample loader.
"""

import numpy as np
import pytest

from config.pipeline_config import build_config
from src.dataset.ingest import dataset_cache_dir, discover, ingest, ingest_with_stats
from src.dataset.loader import (
    SphereDataset,
    augment,
    collate,
    load_batch,
    load_sphere_set,
    sphere_features,
    to_sample,
)
from src.dataset.manifest import MANIFEST_NAME, DatasetManifest, ManifestHeader
from src.errors import CacheCorrupt, ConfigMismatch, EmptyDataset, UserError
from src.state import InfillingSphere, SphereSet, SphereSide, Split
from tests.fixtures.meshes import box_mesh, write_mesh


def make_set(count, resolution=16, n_requested=None):
    spheres = [
        InfillingSphere(center=(i, i, i), radius=1.0 + i, side=SphereSide.INTERIOR, contact_count=1)
        for i in range(count)
    ]
    return SphereSet(spheres=spheres, n_requested=n_requested or count, resolution=resolution,
                     side=SphereSide.INTERIOR, n_interior=count)


# ============================================================================
# Discovery and Ingestion Tests
# ============================================================================

@pytest.mark.integration
class TestIngest:
    """Test converting a class/split tree into sphere caches."""

    def test_discover(self, dataset_root):
        classes, items = discover(dataset_root)

        assert classes == ["ball", "box"]
        assert len(items) == 12
        assert [item.class_name for item in items[:6]] == ["ball"] * 6
        assert items[0].split == Split.TRAIN
        assert items[0].cache_path.as_posix() == "ball/train/ball_0000.isph"

    def test_discover_needs_two_classes(self, tmp_path):
        write_mesh(box_mesh(), tmp_path / "only" / "box" / "train" / "a.off")

        with pytest.raises(EmptyDataset):
            discover(tmp_path / "only")

    def test_discover_missing_root(self, tmp_path):
        with pytest.raises(EmptyDataset):
            discover(tmp_path / "absent")

    def test_manifest_contents(self, toy_manifest, toy_config):
        assert toy_manifest.config_hash == toy_config.config_hash()
        assert toy_manifest.classes == ["ball", "box"]
        assert toy_manifest.k == 2
        assert len(toy_manifest.split_entries(Split.TRAIN)) == 8
        assert len(toy_manifest.split_entries(Split.TEST)) == 4
        assert toy_manifest.counts() == {"ball": {"train": 4, "test": 2}, "box": {"train": 4, "test": 2}}
        for entry in toy_manifest.entries:
            assert entry.label == toy_manifest.classes.index(entry.class_name)
            assert 1 <= entry.count <= 8
            assert toy_manifest.cache_file(entry).is_file()

    def test_cache_location(self, toy_manifest, dataset_root, toy_config):
        assert toy_manifest.root == dataset_cache_dir(dataset_root, toy_config)
        assert (toy_manifest.root / MANIFEST_NAME).is_file()

    def test_rerun_reuses_caches(self, toy_manifest, dataset_root, toy_config):
        manifest, stats = ingest_with_stats(dataset_root, toy_config)

        assert stats.cached == stats.total == 12
        assert stats.converted == 0
        assert [e.count for e in manifest.entries] == [e.count for e in toy_manifest.entries]

    def test_other_config_needs_force(self, toy_manifest, dataset_root, toy_config):
        changed = toy_config.model_copy(update={"n_spheres": 4})

        with pytest.raises(ConfigMismatch):
            ingest(dataset_root, changed)

        manifest, stats = ingest_with_stats(dataset_root, changed, force=True)
        assert manifest.config_hash == changed.config_hash()
        assert stats.converted == 12

    def test_unreadable_mesh_is_skipped(self, dataset_root, toy_config):
        (dataset_root / "box" / "test" / "broken.off").write_text("OFF\n3 1 0\n0 0 0\n", encoding="utf-8")
        seen = []

        manifest, stats = ingest_with_stats(dataset_root, toy_config, progress=lambda item, status: seen.append(status))

        assert stats.failed == 1
        assert stats.failures[0][0].endswith("broken.off")
        assert len(manifest.entries) == 12
        assert seen.count("failed") == 1 and len(seen) == 13

    def test_parallel_matches_serial(self, tmp_path, dataset_root, toy_config):
        serial = ingest(dataset_root, toy_config)
        parallel_config = toy_config.model_copy(update={"workers": 2, "cache_dir": tmp_path / "parallel"})

        parallel = ingest(dataset_root, parallel_config)

        assert [e.count for e in parallel.entries] == [e.count for e in serial.entries]
        first = serial.entries[0]
        assert load_sphere_set(parallel, first).spheres == load_sphere_set(serial, first).spheres


# ============================================================================
# Manifest Tests
# ============================================================================

@pytest.mark.unit
class TestManifest:
    """Test manifest persistence and validation."""

    def test_reload(self, toy_manifest):
        loaded = DatasetManifest.load(toy_manifest.root)

        assert loaded.header == toy_manifest.header
        assert loaded.entries == toy_manifest.entries
        assert loaded.root == toy_manifest.root

    def test_missing(self, tmp_path):
        with pytest.raises(CacheCorrupt):
            DatasetManifest.load(tmp_path)

    def test_malformed(self, tmp_path):
        (tmp_path / MANIFEST_NAME).write_text("{not json\n", encoding="utf-8")

        with pytest.raises(CacheCorrupt):
            DatasetManifest.load(tmp_path)

    def test_header_needs_sorted_classes(self):
        with pytest.raises(ValueError):
            ManifestHeader(config_hash="0" * 16, resolution=16, n_spheres=8, side=SphereSide.INTERIOR,
                           d_schedule=[10, 5, 0], classes=["box", "ball"])

    def test_header_needs_two_classes(self):
        with pytest.raises(ValueError):
            ManifestHeader(config_hash="0" * 16, resolution=16, n_spheres=8, side=SphereSide.INTERIOR,
                           d_schedule=[10, 5, 0], classes=["ball"])

    def test_stale_cache_rejected(self, toy_manifest, toy_config):
        entry = toy_manifest.entries[0]
        stale = toy_manifest.model_copy(update={
            "header": toy_manifest.header.model_copy(update={"config_hash": "f" * 16}),
        })

        with pytest.raises(CacheCorrupt):
            load_sphere_set(stale, entry)


# ============================================================================
# Loader Tests
# ============================================================================

@pytest.mark.unit
@pytest.mark.fast
class TestFeatures:
    """Test sphere set to network input conversion."""

    def test_normalized_ranges(self):
        features = sphere_features(make_set(8, resolution=16))

        assert features.dtype == np.float32
        assert features.shape == (8, 4)
        assert np.all(np.abs(features[:, :3]) <= 1.0)
        assert np.all((features[:, 3] >= 0.0) & (features[:, 3] <= 1.0))

    def test_center_mapping(self):
        features = sphere_features(make_set(1, resolution=16))

        # voxel 0 of 16: (2*0 + 1 - 16) / 16
        assert np.allclose(features[0, :3], -15.0 / 16.0)
        assert np.isclose(features[0, 3], 1.0 / 8.0)

    def test_padding_repeats_last_row(self):
        sample = to_sample(make_set(3, n_requested=5), label=1, n=5)

        assert sample.padded
        assert sample.n == 5
        assert np.array_equal(sample.features[3], sample.features[2])
        assert np.array_equal(sample.features[4], sample.features[2])

    def test_prefix_truncation(self):
        sphere_set = make_set(6)

        sample = to_sample(sphere_set, label=0, n=4)

        assert not sample.padded
        assert np.array_equal(sample.features, sphere_features(sphere_set)[:4])

    def test_empty_set(self):
        with pytest.raises(CacheCorrupt):
            to_sample(make_set(0, n_requested=4), label=0)

    def test_augment_leaves_radii(self, rng):
        features = sphere_features(make_set(8))

        augmented = augment(features, rng)

        assert np.array_equal(augmented[:, 3], features[:, 3])
        assert not np.array_equal(augmented[:, :3], features[:, :3])
        assert np.all(np.abs(augmented[:, :3]) <= 1.0)

    def test_augment_rotates_about_y(self, rng):
        features = rng.uniform(-0.5, 0.5, size=(8, 4)).astype(np.float32)

        augmented = augment(features, np.random.default_rng(0), sigma=0.0, clip=0.0)

        # rotation about y keeps heights and horizontal radii
        assert np.allclose(augmented[:, 1], features[:, 1], atol=1e-6)
        assert np.allclose(np.hypot(augmented[:, 0], augmented[:, 2]),
                           np.hypot(features[:, 0], features[:, 2]), atol=1e-5)

    def test_collate(self):
        samples = [to_sample(make_set(4), label=i) for i in range(3)]

        features, labels = collate(samples)

        assert features.shape == (3, 4, 4)
        assert labels.tolist() == [0, 1, 2]

    def test_collate_empty(self):
        with pytest.raises(UserError):
            collate([])


@pytest.mark.integration
class TestSphereDataset:
    """Test split access over a manifest."""

    def test_length_and_labels(self, toy_manifest):
        dataset = SphereDataset(toy_manifest, Split.TRAIN)

        assert len(dataset) == 8
        assert sorted(dataset.labels.tolist()) == [0] * 4 + [1] * 4

    def test_batch_shapes(self, toy_manifest):
        features, labels = SphereDataset(toy_manifest, Split.TEST).batch([0, 1, 2])

        assert features.shape == (3, 8, 4)
        assert labels.shape == (3,)

    def test_with_count(self, toy_manifest):
        dataset = SphereDataset(toy_manifest, Split.TEST).with_count(4)

        features, _ = dataset.batch([0])

        assert features.shape == (1, 4, 4)

    def test_augmented_batch_differs(self, toy_manifest, rng):
        dataset = SphereDataset(toy_manifest, Split.TRAIN)

        plain, _ = dataset.batch([0])
        augmented, _ = dataset.batch([0], rng)

        assert not np.array_equal(plain, augmented)

    def test_load_batch(self, toy_manifest, rng):
        samples = load_batch(toy_manifest, Split.TRAIN, [0, 7], training=True, rng=rng)

        assert len(samples) == 2
        assert all(sample.n == 8 for sample in samples)

    def test_load_batch_out_of_range(self, toy_manifest):
        with pytest.raises(UserError):
            load_batch(toy_manifest, Split.TEST, [4])

    def test_training_needs_rng(self, toy_manifest):
        with pytest.raises(UserError):
            load_batch(toy_manifest, Split.TRAIN, [0], training=True)

    def test_empty_split(self, toy_manifest):
        no_test = toy_manifest.model_copy(update={
            "entries": toy_manifest.split_entries(Split.TRAIN),
        })

        with pytest.raises(EmptyDataset):
            SphereDataset(no_test, Split.TEST)
