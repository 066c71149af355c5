"""Single-step sign-gradient perturbations (FGSM) under a max-norm budget,
with the budget drawn uniformly per minibatch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .masking import MaskedInput
from .network import NetworkParams, as_tensor
from .objectives import input_gradient_of_loss, input_gradient_of_loss_batch


@dataclass(frozen=True)
class AttackSpec:
    """Perturbation norm, budget interval, and output clamp range."""

    epsilon_low: float
    epsilon_high: float
    clamp_low: float = 0.0
    clamp_high: float = 1.0
    norm_order: str = "inf"

    def __post_init__(self):
        if not 0.0 <= self.epsilon_low <= self.epsilon_high:
            raise ValueError(
                f"need 0 <= epsilon_low <= epsilon_high, got "
                f"[{self.epsilon_low}, {self.epsilon_high}]"
            )
        if self.clamp_low >= self.clamp_high:
            raise ValueError(
                f"clamp_low {self.clamp_low} must be below clamp_high {self.clamp_high}"
            )
        if self.norm_order != "inf":
            raise ValueError(f"only the max norm is supported, got {self.norm_order!r}")


@dataclass
class Perturbation:
    delta: np.ndarray
    epsilon_used: float


def sample_epsilon(rng: np.random.Generator, spec: AttackSpec) -> float:
    """Uniform budget draw from [epsilon_low, epsilon_high]."""
    return float(rng.uniform(spec.epsilon_low, spec.epsilon_high))


def fgsm(
    params: NetworkParams, x_tilde: MaskedInput, label: int, epsilon: float
) -> Perturbation:
    """delta = epsilon * sign(d CE/d input), with sign(0) = 0.

    Touches every coordinate, masked ones included.
    """
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    grad = input_gradient_of_loss(params, x_tilde.data, label)
    return Perturbation(epsilon * np.sign(grad), epsilon)


def apply_perturbation(
    x_tilde: MaskedInput, p: Perturbation, spec: AttackSpec
) -> np.ndarray:
    """x_tilde + delta, clamped into [clamp_low, clamp_high]."""
    data = as_tensor(x_tilde.data)
    if p.delta.shape != data.shape:
        raise ShapeError(f"delta {p.delta.shape} does not match input {data.shape}")
    return np.clip(data + p.delta, spec.clamp_low, spec.clamp_high)


def fgsm_batch(
    params: NetworkParams,
    x_tilde: np.ndarray,
    labels: np.ndarray,
    epsilon: float,
    spec: AttackSpec,
) -> np.ndarray:
    """Perturb every row by its own sign gradient, then clamp."""
    grad = input_gradient_of_loss_batch(params, x_tilde, labels)
    return np.clip(
        x_tilde + epsilon * np.sign(grad), spec.clamp_low, spec.clamp_high
    )
