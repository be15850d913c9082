"""
Permutation-invariant sphere classifier.

Shared per-sphere MLP (1×1 convolutions with batch norm and ReLU), a
channel-wise max pool over the sphere axis, then a fully-connected head that
produces k logits. No input or feature transform sub-networks.

Checkpoint format (INET): magic, u32 length + UTF-8 NetConfig JSON, u64 config
hash, u32 tensor count, then every parameter and buffer as a flat
little-endian f32 block in state_dict order.
"""

import logging
import struct
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from config.net_config import NetConfig
from src.errors import CacheCorrupt, ShapeMismatch

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"INET"
_CHECKPOINT_TAIL = struct.Struct("<QI")


class SharedMLP(nn.Module):
    """Per-sphere MLP applied identically to every row."""

    def __init__(self, input_dim: int, dims: List[int], batch_norm: bool = True):
        super().__init__()
        self.convs = nn.ModuleList()
        self.norms = nn.ModuleList()
        width = input_dim
        for dim in dims:
            self.convs.append(nn.Conv1d(width, dim, 1))
            self.norms.append(nn.BatchNorm1d(dim) if batch_norm else nn.Identity())
            width = dim

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        # x: (B, C, n)
        for conv, norm in zip(self.convs, self.norms):
            x = F.relu(norm(conv(x)))
        return x


class SphereNet(nn.Module):
    """Shared MLP → max pool → FC head."""

    def __init__(self, config: NetConfig):
        super().__init__()
        self.config = config
        self.mlp = SharedMLP(config.input_dim, config.mlp_dims, config.batch_norm)

        self.fcs = nn.ModuleList()
        self.fc_norms = nn.ModuleList()
        width = config.global_dim
        for dim in config.fc_dims:
            self.fcs.append(nn.Linear(width, dim))
            self.fc_norms.append(nn.BatchNorm1d(dim) if config.batch_norm else nn.Identity())
            width = dim
        self.dropout = nn.Dropout(p=1.0 - config.keep_prob) if config.fc_dims else nn.Identity()
        self.classifier = nn.Linear(width, config.k)

    def _check_input(self, x: torch.Tensor) -> None:
        if x.dim() != 3 or x.shape[2] != self.config.input_dim or x.shape[1] < 1:
            raise ShapeMismatch(
                f"Expected input of shape B×n×{self.config.input_dim} with n >= 1, got {tuple(x.shape)}"
            )

    def point_features(self, x: torch.Tensor) -> torch.Tensor:
        """Per-sphere global-feature activations, (B, global_dim, n)."""
        self._check_input(x)
        return self.mlp(x.transpose(1, 2))

    def pool(self, features: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        """
        Channel-wise max over the sphere axis.

        Returns (pooled (B, C), winner indices (B, C)). Ties go to the lowest
        row; the gradient flows only through that row.
        """
        winners = _first_argmax(features)
        pooled = torch.gather(features, 2, winners.unsqueeze(2)).squeeze(2)
        return pooled, winners

    def head(self, pooled: torch.Tensor) -> torch.Tensor:
        x = pooled
        for fc, norm in zip(self.fcs, self.fc_norms):
            x = F.relu(norm(fc(x)))
        x = self.dropout(x)
        return self.classifier(x)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """(B, n, input_dim) → (B, k) logits."""
        pooled, _ = self.pool(self.point_features(x))
        return self.head(pooled)

    def critical_indices(self, x: torch.Tensor) -> List[np.ndarray]:
        """Per sample, the sorted unique rows that win at least one pooled channel."""
        with torch.no_grad():
            _, winners = self.pool(self.point_features(x))
        return [np.unique(row.cpu().numpy()) for row in winners]


def _first_argmax(features: torch.Tensor) -> torch.Tensor:
    """Index of the first maximum along the last axis."""
    n = features.shape[2]
    is_max = features == features.max(dim=2, keepdim=True).values
    positions = torch.arange(n, device=features.device).expand_as(features)
    return torch.where(is_max, positions, torch.full_like(positions, n)).min(dim=2).values


def build_model(config: NetConfig, seed: Optional[int] = None) -> SphereNet:
    """Create a model; a seed makes the initial weights reproducible."""
    if seed is not None:
        torch.manual_seed(seed)
    return SphereNet(config)


def to_tensor(features: np.ndarray, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    return torch.as_tensor(np.ascontiguousarray(features), dtype=dtype)


# ============================================================================
# Checkpoints
# ============================================================================

def save_checkpoint(model: SphereNet, path, config_tag: int = 0) -> Path:
    """Write an INET checkpoint (parameters and batch-norm statistics)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    config_bytes = model.config.to_json().encode("utf-8")
    tensors = [
        tensor.detach().cpu().numpy().astype("<f4").ravel()
        for tensor in model.state_dict().values()
    ]

    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", len(config_bytes)))
        f.write(config_bytes)
        f.write(_CHECKPOINT_TAIL.pack(config_tag, len(tensors)))
        for block in tensors:
            f.write(block.tobytes())
    tmp.replace(path)
    return path


def load_checkpoint(path) -> Tuple[SphereNet, int]:
    """
    Read an INET checkpoint.

    Returns:
        (model in eval mode, config tag)

    Raises:
        CacheCorrupt: Missing file, bad magic, or size mismatch
    """
    path = Path(path)
    if not path.is_file():
        raise CacheCorrupt(f"Checkpoint not found: {path}")
    data = path.read_bytes()
    if data[:4] != CHECKPOINT_MAGIC:
        raise CacheCorrupt(f"Bad magic {data[:4]!r} in {path}, expected {CHECKPOINT_MAGIC!r}")

    try:
        (length,) = struct.unpack_from("<I", data, 4)
        config = NetConfig.from_json(data[8:8 + length].decode("utf-8"))
        config_tag, count = _CHECKPOINT_TAIL.unpack_from(data, 8 + length)
    except (struct.error, ValueError, TypeError) as e:
        raise CacheCorrupt(f"Malformed checkpoint header in {path}: {e}") from e

    model = SphereNet(config)
    state = model.state_dict()
    if count != len(state):
        raise CacheCorrupt(f"{path} holds {count} tensors, model expects {len(state)}")

    offset = 8 + length + _CHECKPOINT_TAIL.size
    expected = offset + 4 * sum(t.numel() for t in state.values())
    if len(data) != expected:
        raise CacheCorrupt(f"{path} holds {len(data)} bytes, expected {expected}")

    loaded = {}
    for name, tensor in state.items():
        block = np.frombuffer(data, dtype="<f4", count=tensor.numel(), offset=offset)
        loaded[name] = torch.from_numpy(block.reshape(tuple(tensor.shape)).copy()).to(tensor.dtype)
        offset += 4 * tensor.numel()
    model.load_state_dict(loaded)
    model.eval()
    return model, config_tag
