"""
Pytest configuration and shared fixtures for testing.

This module provides reusable test fixtures for all test files. Every test
runs with INSPHERE_* paths redirected into its own tmp_path, so nothing is
written into the working tree.
"""

import numpy as np
import pytest
from dotenv import load_dotenv

# Load environment variables from .env file for all tests
load_dotenv()

from config.net_config import NetConfig, TrainingConfig
from config.pipeline_config import build_config
from src.dataset.ingest import ingest
from src.geometry.sdf import compute_sdf
from src.utils.run_tracker import reset_run_tracker
from tests.fixtures.meshes import ball_grid, ball_mesh, box_mesh, build_dataset_tree, write_mesh


# ============================================================================
# Environment Fixtures
# ============================================================================

@pytest.fixture(autouse=True)
def isolated_paths(tmp_path, monkeypatch):
    """Point caches, outputs and the run database at tmp_path."""
    monkeypatch.setenv("INSPHERE_CACHE_DIR", str(tmp_path / "cache"))
    monkeypatch.setenv("INSPHERE_OUTPUT_DIR", str(tmp_path / "outputs"))
    monkeypatch.setenv("INSPHERE_RUN_DB", str(tmp_path / "runs.db"))
    reset_run_tracker()
    yield
    reset_run_tracker()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# ============================================================================
# Config Fixtures
# ============================================================================

@pytest.fixture
def toy_config(tmp_path):
    """Small interior config: 16³ grid, 8 spheres."""
    return build_config({
        "resolution": 16,
        "n_spheres": 8,
        "side": "interior",
        "epochs": 2,
        "batch_size": 4,
        "cache_dir": tmp_path / "cache",
        "output_dir": tmp_path / "outputs",
    })


@pytest.fixture
def toy_net():
    """Tiny network for gradient and invariance checks."""
    return NetConfig(name="toy", mlp_dims=[8, 16], fc_dims=[12], k=3)


@pytest.fixture
def fast_training():
    return TrainingConfig(epochs=2, batch_size=4, augment=False)


# ============================================================================
# Geometry Fixtures
# ============================================================================

@pytest.fixture
def cube_off(tmp_path):
    """OFF file of a unit cube."""
    return write_mesh(box_mesh(), tmp_path / "cube.off")


@pytest.fixture
def ball_off(tmp_path):
    """OFF file of an icosphere."""
    return write_mesh(ball_mesh(subdivisions=2), tmp_path / "ball.off")


@pytest.fixture
def ball_sdf():
    """SDF of a solid ball of radius 6 voxels at 24³."""
    return compute_sdf(ball_grid(24, 6.0))


# ============================================================================
# Dataset Fixtures
# ============================================================================

@pytest.fixture
def dataset_root(tmp_path):
    return build_dataset_tree(tmp_path / "ModelNetToy")


@pytest.fixture
def toy_manifest(dataset_root, toy_config):
    """Ingested two-class dataset."""
    return ingest(dataset_root, toy_config)
