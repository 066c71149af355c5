"""Saliency-ordered masking: sort input-feature gradients ascending and
replace the bottom-k features with uniform draws from the feature range.

Gradients are used signed, not by magnitude: the most negative features
are masked first. Ties break by ascending feature index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .network import NetworkParams, as_tensor, input_gradient


@dataclass
class SaliencyMap:
    """Signed per-feature gradient of one sample's true-class logit."""

    values: np.ndarray  # [1 x input_dim]
    source_label: int

    def __post_init__(self):
        self.values = as_tensor(self.values)
        if self.values.ndim != 2 or self.values.shape[0] != 1:
            raise ValueError(f"saliency must be [1 x d], got {self.values.shape}")


@dataclass(frozen=True)
class MaskSpec:
    """Fraction of features to mask and the value range to redraw from."""

    k_fraction: float
    value_low: float = 0.0
    value_high: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.k_fraction <= 1.0:
            raise ValueError(f"k_fraction must lie in [0, 1], got {self.k_fraction}")
        if self.value_low > self.value_high:
            raise ValueError(
                f"value_low {self.value_low} exceeds value_high {self.value_high}"
            )


@dataclass
class MaskedInput:
    """A sample with its bottom-k features randomized."""

    data: np.ndarray  # [1 x input_dim]
    masked_indices: frozenset[int]


def mask_count(k_fraction: float, dim: int) -> int:
    return int(math.floor(k_fraction * dim))


def sort_ascending(saliency: SaliencyMap) -> np.ndarray:
    """Feature indices ordered by signed gradient ascending, stable ties."""
    return np.argsort(saliency.values[0], kind="stable")


def mask_bottom_k(
    x, order: np.ndarray, spec: MaskSpec, rng: np.random.Generator
) -> MaskedInput:
    """Replace the first floor(k*d) features of ``order`` with uniform draws."""
    x = as_tensor(x)
    if x.ndim != 2 or x.shape[0] != 1:
        raise ValueError(f"mask_bottom_k takes a single [1 x d] sample, got {x.shape}")
    d = x.shape[1]
    order = np.asarray(order)
    if sorted(order.tolist()) != list(range(d)):
        raise ValueError("order must be a permutation of the feature indices")
    m = mask_count(spec.k_fraction, d)
    data = x.copy()
    picked = order[:m]
    data[0, picked] = rng.uniform(spec.value_low, spec.value_high, size=m)
    return MaskedInput(data, frozenset(int(i) for i in picked))


def compute_and_mask(
    params: NetworkParams,
    x,
    label: int,
    spec: MaskSpec,
    rng: np.random.Generator,
) -> MaskedInput:
    """Saliency -> ascending sort -> bottom-k mask, per the current params."""
    saliency = SaliencyMap(input_gradient(params, x, label), label)
    return mask_bottom_k(x, sort_ascending(saliency), spec, rng)


def mask_batch(
    x: np.ndarray,
    saliency: np.ndarray,
    spec: MaskSpec,
    rng: np.random.Generator,
) -> np.ndarray:
    """Batched mask step; row i consumes the same draws as a per-sample loop.

    Draws fill row-major, so masking n rows together consumes the rng
    exactly like n sequential mask_bottom_k calls.
    """
    n, d = x.shape
    m = mask_count(spec.k_fraction, d)
    data = x.copy()
    if m > 0:
        orders = np.argsort(saliency, axis=1, kind="stable")
        draws = rng.uniform(spec.value_low, spec.value_high, size=(n, m))
        data[np.arange(n)[:, None], orders[:, :m]] = draws
    return data
