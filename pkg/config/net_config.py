"""
Network architecture presets and training defaults for the sphere classifier.

Defines the three lightweight architectures (one per input size) plus a
point-network reference used only for parameter/FLOP comparison.
"""

import json
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List

from src.errors import UnknownNetConfig


@dataclass
class NetConfig:
    """Layer layout of a permutation-invariant sphere classifier."""

    name: str
    """Preset identifier (e.g., 't2-256')"""

    mlp_dims: List[int]
    """Output widths of the shared per-sphere MLP; the last one is the global feature"""

    fc_dims: List[int] = field(default_factory=list)
    """Hidden widths of the fully-connected head (empty = single linear layer)"""

    k: int = 40
    """Number of classes"""

    input_dim: int = 4
    """Per-row input width: (x, y, z, r)"""

    batch_norm: bool = True
    """Batch norm after every hidden layer"""

    keep_prob: float = 0.7
    """Dropout keep probability on the penultimate FC layer (when present)"""

    description: str = ""

    def __post_init__(self):
        if not self.mlp_dims:
            raise UnknownNetConfig(f"Network '{self.name}' needs at least one MLP layer")
        if self.k < 2:
            raise UnknownNetConfig(f"Network '{self.name}' needs k >= 2 classes, got {self.k}")

    @property
    def global_dim(self) -> int:
        return self.mlp_dims[-1]

    def with_classes(self, k: int) -> "NetConfig":
        return replace(self, k=k)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "NetConfig":
        return cls(**json.loads(text))


@dataclass
class TrainingConfig:
    """Optimizer and schedule settings."""

    learning_rate: float = 1e-3
    """Adam learning rate"""

    decay_rate: float = 0.7
    """Multiplicative learning-rate decay"""

    decay_step: int = 20
    """Epochs between decays"""

    batch_size: int = 32

    epochs: int = 100
    """Desk-scale default (250 at full scale)"""

    jitter_sigma: float = 0.01
    """Gaussian jitter on sphere centers during augmentation"""

    jitter_clip: float = 0.05

    augment: bool = True

    num_threads: int = 1
    """Torch intra-op threads; one thread keeps summation order fixed"""

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TrainingConfig":
        return cls(**json.loads(text))


# ============================================================================
# Presets
# ============================================================================

T2_1024 = NetConfig(
    name="t2-1024",
    mlp_dims=[64, 128, 1024],
    fc_dims=[512, 256],
    description="1024 spheres: mlp(4,64,128,1024), fc(1024,512,256,k)",
)

T2_512 = NetConfig(
    name="t2-512",
    mlp_dims=[64, 128, 512],
    fc_dims=[256],
    description="512 spheres: mlp(4,64,128,512), fc(512,256,k)",
)

T2_256 = NetConfig(
    name="t2-256",
    mlp_dims=[64, 128, 256],
    fc_dims=[],
    description="256 spheres: mlp(4,64,128,256), fc(256,k)",
)

POINTNET_VANILLA = NetConfig(
    name="pointnet-vanilla",
    input_dim=3,
    mlp_dims=[64, 64, 64, 128, 1024],
    fc_dims=[512, 256],
    description="Point-network reference without input transforms (stats only)",
)

NET_PRESETS: Dict[str, NetConfig] = {
    preset.name: preset
    for preset in (T2_1024, T2_512, T2_256, POINTNET_VANILLA)
}

TRAINABLE_PRESETS = ("t2-1024", "t2-512", "t2-256")

PUBLISHED_PARAM_ESTIMATES: Dict[str, int] = {
    "t2-256": 100_000,
}
"""Rounded parameter counts quoted for the lightweight network; reported next to exact counts"""


# ============================================================================
# Configuration Helper Functions
# ============================================================================

def get_net_config(name: str, k: int = 40) -> NetConfig:
    """
    Get a network preset by name.

    Args:
        name: Preset identifier (t2-1024, t2-512, t2-256, pointnet-vanilla)
        k: Number of classes

    Returns:
        NetConfig with the requested class count

    Raises:
        UnknownNetConfig: If no preset has that name
    """
    preset = NET_PRESETS.get(name)
    if preset is None:
        raise UnknownNetConfig(
            f"Unknown network '{name}'. Available: {', '.join(sorted(NET_PRESETS))}"
        )
    return preset.with_classes(k)


# ============================================================================
# Default Settings
# ============================================================================

DEFAULT_NET = "t2-256"
"""Default network preset (desk scale)"""

FULL_SCALE_EPOCHS = 250
"""Epoch count used for full-dataset runs"""
