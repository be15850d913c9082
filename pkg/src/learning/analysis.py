"""
Model analysis: closed-form size/cost accounting, gradient verification and
critical-sphere extraction.
"""

import copy
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import torch
import torch.nn.functional as F

from config.net_config import NET_PRESETS, PUBLISHED_PARAM_ESTIMATES, NetConfig
from src.errors import ShapeMismatch
from src.learning.network import SphereNet, to_tensor
from src.state import SphereSample

logger = logging.getLogger(__name__)

REFERENCE_NET = "pointnet-vanilla"

GRADIENT_FLOOR = 1e-4
"""Denominator floor for relative gradient errors; keeps near-zero gradients from dominating"""


# ============================================================================
# Parameter and FLOP accounting
# ============================================================================

@dataclass
class LayerStats:
    name: str
    params: int
    flops: int


@dataclass
class ModelStats:
    """Closed-form counts for one architecture at a given sphere count."""

    name: str
    n: int
    params: int
    """Trainable parameters (weights, biases, batch-norm scale and shift)"""

    running_stats: int
    """Batch-norm running mean and variance (not trainable)"""

    flops: int
    mlp_flops: int
    layers: List[LayerStats] = field(default_factory=list)

    @property
    def total_with_running_stats(self) -> int:
        return self.params + self.running_stats


def model_stats(config: NetConfig, n: int = 1024) -> ModelStats:
    """
    Parameter and forward FLOP counts for a network.

    Counting rules: a multiply-accumulate is 2 FLOPs, batch norm costs 2 FLOPs
    per feature, max pooling costs n comparisons per channel. Shared MLP layers
    run once per sphere; FC layers once per object.

    Args:
        config: Architecture
        n: Spheres (rows) per object

    Returns:
        ModelStats with a per-layer breakdown
    """
    layers: List[LayerStats] = []
    running = 0
    mlp_flops = 0

    width = config.input_dim
    for index, dim in enumerate(config.mlp_dims, start=1):
        layer_flops = 2 * width * dim * n
        layers.append(LayerStats(f"mlp{index} ({width}→{dim})", width * dim + dim, layer_flops))
        mlp_flops += layer_flops
        if config.batch_norm:
            layers.append(LayerStats(f"mlp{index}.bn", 2 * dim, 2 * dim * n))
            mlp_flops += 2 * dim * n
            running += 2 * dim
        width = dim

    layers.append(LayerStats(f"maxpool ({width}×{n})", 0, width * n))

    for index, dim in enumerate(config.fc_dims, start=1):
        layers.append(LayerStats(f"fc{index} ({width}→{dim})", width * dim + dim, 2 * width * dim))
        if config.batch_norm:
            layers.append(LayerStats(f"fc{index}.bn", 2 * dim, 2 * dim))
            running += 2 * dim
        width = dim
    layers.append(LayerStats(f"classifier ({width}→{config.k})", width * config.k + config.k, 2 * width * config.k))

    return ModelStats(
        name=config.name,
        n=n,
        params=sum(layer.params for layer in layers),
        running_stats=running,
        flops=sum(layer.flops for layer in layers),
        mlp_flops=mlp_flops,
        layers=layers,
    )


def count_parameters(model: SphereNet) -> int:
    """Trainable parameter count of an instantiated model."""
    return sum(p.numel() for p in model.parameters() if p.requires_grad)


@dataclass
class StatsComparison:
    stats: ModelStats
    param_ratio: float
    """params / reference params"""
    flop_ratio: float
    published_estimate: Optional[int] = None


def compare_presets(n: int = 1024, k: int = 40) -> Dict[str, StatsComparison]:
    """
    Stats of every preset relative to the point-network reference.

    All networks are counted at the same row count n.
    """
    reference = model_stats(NET_PRESETS[REFERENCE_NET].with_classes(k), n)
    comparison = {}
    for name, preset in NET_PRESETS.items():
        stats = model_stats(preset.with_classes(k), n)
        comparison[name] = StatsComparison(
            stats=stats,
            param_ratio=stats.params / reference.params,
            flop_ratio=stats.flops / reference.flops,
            published_estimate=PUBLISHED_PARAM_ESTIMATES.get(name),
        )
    return comparison


def published_estimate_note(config: NetConfig, n: int = 256) -> Optional[str]:
    """Explain the gap between the exact count and a quoted rounded estimate, if one exists."""
    estimate = PUBLISHED_PARAM_ESTIMATES.get(config.name)
    if estimate is None:
        return None
    stats = model_stats(config, n)
    return (
        f"{config.name}: exact count is {stats.params:,} trainable parameters "
        f"({stats.total_with_running_stats:,} with batch-norm running statistics); "
        f"the quoted figure of about {estimate:,} is not reproduced by this layer layout "
        f"and is reported for reference only."
    )


# ============================================================================
# Gradient verification
# ============================================================================

@dataclass
class GradientCheckResult:
    max_relative_error: float
    checked: int
    epsilon: float


def _loss(model: SphereNet, x: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    return F.cross_entropy(model(x), y)


def gradient_check(
    model: SphereNet,
    sample: SphereSample,
    epsilon: float = 1e-4,
    fraction: float = 0.01,
    seed: int = 0,
    min_checked: int = 10,
) -> GradientCheckResult:
    """
    Compare backprop gradients with central finite differences.

    Runs on a double-precision copy in eval mode, so batch norm uses its
    running statistics and dropout is off. A random subset of parameter
    entries (fraction of the total, at least min_checked) is perturbed by
    ±epsilon.

    Relative error per entry: |analytic - numeric| / max(|analytic|, |numeric|, GRADIENT_FLOOR).

    Returns:
        GradientCheckResult with the maximum relative error
    """
    twin = copy.deepcopy(model).double()
    twin.eval()
    x = to_tensor(sample.features[None], dtype=torch.float64)
    y = torch.tensor([sample.label])

    twin.zero_grad()
    _loss(twin, x, y).backward()

    params = [p for p in twin.parameters() if p.requires_grad]
    sizes = np.array([p.numel() for p in params])
    total = int(sizes.sum())
    count = min(total, max(min_checked, int(round(fraction * total))))
    rng = np.random.default_rng(seed)
    picks = np.sort(rng.choice(total, size=count, replace=False))
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    worst = 0.0
    with torch.no_grad():
        for flat in picks:
            owner = int(np.searchsorted(offsets, flat, side="right")) - 1
            param = params[owner]
            index = int(flat - offsets[owner])
            analytic = float(param.grad.view(-1)[index])

            view = param.view(-1)
            original = float(view[index])
            view[index] = original + epsilon
            plus = float(_loss(twin, x, y))
            view[index] = original - epsilon
            minus = float(_loss(twin, x, y))
            view[index] = original

            numeric = (plus - minus) / (2.0 * epsilon)
            error = abs(analytic - numeric) / max(abs(analytic), abs(numeric), GRADIENT_FLOOR)
            worst = max(worst, error)

    logger.debug(f"Gradient check on {count} of {total} parameters: max relative error {worst:.2e}")
    return GradientCheckResult(max_relative_error=worst, checked=count, epsilon=epsilon)


# ============================================================================
# Critical spheres
# ============================================================================

def critical_spheres(model: SphereNet, sample: SphereSample) -> np.ndarray:
    """
    Indices of the spheres that win the max pool in at least one global-feature channel.

    Evaluated in inference mode. Ties go to the lowest row, so padding rows
    (repeats of the last sphere) are never reported twice.

    Returns:
        Sorted unique row indices (at most the global feature width)
    """
    model.eval()
    return model.critical_indices(to_tensor(sample.features[None]))[0]


def critical_subset(sample: SphereSample, indices: np.ndarray) -> SphereSample:
    """
    The sample restricted to the given rows, padded back to n by repeating the last kept row.

    Raises:
        ShapeMismatch: No rows selected, or an index outside the sample
    """
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size == 0:
        raise ShapeMismatch("Critical subset needs at least one row")
    if indices.min() < 0 or indices.max() >= sample.n:
        raise ShapeMismatch(f"Critical indices must lie in [0, {sample.n}), got {indices.min()}..{indices.max()}")
    kept = sample.features[indices]
    fill = np.repeat(kept[-1:], sample.n - len(kept), axis=0)
    return SphereSample(features=np.concatenate([kept, fill]), label=sample.label, padded=True)
