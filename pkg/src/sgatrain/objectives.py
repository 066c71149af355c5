"""Softmax, cross-entropy, KL divergence, the composite training objective,
and their exact gradients through the network.

Value functions and gradient formulas share one code path for the
probability computation (log-softmax), so finite differences of the values
reproduce the analytic gradients. The KL floor on q protects values only;
the gradient formulas assume the floor is inactive, which holds for any
logits of plausible magnitude (the floor binds only past log-probability
-12 * ln 10).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .network import (
    GradientBundle,
    NetworkParams,
    backprop,
    check_labels,
    _check_input,
    forward_cached,
)

KL_FLOOR = 1e-12
_LOG_KL_FLOOR = np.log(KL_FLOOR)

OBJECTIVE_KINDS = ("ce_only", "ce_plus_kl")


@dataclass(frozen=True)
class ObjectiveSpec:
    """Which loss to differentiate: plain CE, or CE + kl_weight * KL."""

    kind: str
    kl_weight: float = 0.0

    def __post_init__(self):
        if self.kind not in OBJECTIVE_KINDS:
            raise ValueError(f"objective kind must be one of {OBJECTIVE_KINDS}")
        if self.kl_weight < 0:
            raise ValueError(f"kl_weight must be >= 0, got {self.kl_weight}")


def log_softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise log-probabilities, stabilized by max subtraction."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits) -> np.ndarray:
    """Row-wise probabilities, stabilized by max subtraction."""
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise ValueError("logits must be finite")
    shifted = np.exp(logits - logits.max(axis=-1, keepdims=True))
    return shifted / shifted.sum(axis=-1, keepdims=True)


def cross_entropy(logits, label: int) -> float:
    """-log softmax(logits)[label] via log-sum-exp."""
    logits = np.asarray(logits, dtype=np.float64).reshape(-1)
    if not 0 <= label < logits.size:
        raise ValueError(f"label {label} out of range for {logits.size} classes")
    return float(-log_softmax(logits)[label])


def _check_distribution(p, name: str) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    if p.min() < -1e-12 or p.max() > 1.0 + 1e-12:
        raise ValueError(f"{name} entries must lie in [0, 1]")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"{name} must sum to 1, got {p.sum()!r}")
    return p


def kl_divergence(p, q) -> float:
    """sum p*ln(p/q) with 0*ln(0/q)=0 and q floored at 1e-12."""
    p = _check_distribution(p, "p")
    q = _check_distribution(q, "q")
    if p.shape != q.shape:
        raise ShapeError(f"distribution lengths differ: {p.shape} vs {q.shape}")
    qf = np.maximum(q, KL_FLOOR)
    terms = np.where(p > 0.0, p * (np.log(np.maximum(p, KL_FLOOR)) - np.log(qf)), 0.0)
    return float(terms.sum())


# --- batched logit-space values and gradients ------------------------------


def ce_values(logits: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Per-row cross-entropy of the labeled class."""
    return -log_softmax(logits)[np.arange(logits.shape[0]), labels]


def ce_logit_grads(logits: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Per-row d(CE)/d(logits) = softmax - onehot."""
    g = np.exp(log_softmax(logits))
    g[np.arange(logits.shape[0]), labels] -= 1.0
    return g


def kl_values(logits_clean: np.ndarray, logits_pert: np.ndarray) -> np.ndarray:
    """Per-row KL(softmax(clean) || softmax(pert)), q floored at 1e-12."""
    logp = log_softmax(logits_clean)
    logqf = np.maximum(log_softmax(logits_pert), _LOG_KL_FLOOR)
    return (np.exp(logp) * (logp - logqf)).sum(axis=-1)


def kl_logit_grads(logits_clean: np.ndarray, logits_pert: np.ndarray):
    """Per-row (d KL/d clean logits, d KL/d perturbed logits)."""
    logp = log_softmax(logits_clean)
    logq = log_softmax(logits_pert)
    logqf = np.maximum(logq, _LOG_KL_FLOOR)
    p = np.exp(logp)
    q = np.exp(logq)
    diff = logp - logqf
    kl = (p * diff).sum(axis=-1, keepdims=True)
    return p * (diff - kl), q - p


def composite_values(logits_clean, logits_pert, labels, kl_weight: float):
    """Per-row CE(clean) + kl_weight * KL(clean || pert)."""
    return ce_values(logits_clean, labels) + kl_weight * kl_values(
        logits_clean, logits_pert
    )


def sga_objective(params: NetworkParams, x, label: int, x_prime, kl_weight: float) -> float:
    """CE on the clean sample plus weighted KL against the perturbed one."""
    from .network import forward  # local import: network must not depend on this module

    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    x_prime = np.asarray(x_prime, dtype=np.float64).reshape(1, -1)
    if x.shape != x_prime.shape:
        raise ShapeError(f"x {x.shape} and x_prime {x_prime.shape} differ")
    labels = check_labels([label], params.spec.num_classes)
    a = forward(params, x)
    b = forward(params, x_prime)
    return float(composite_values(a, b, labels, kl_weight)[0])


def loss_and_param_grads(
    params: NetworkParams,
    x,
    labels,
    objective: ObjectiveSpec,
    x_adv=None,
) -> GradientBundle:
    """Exact mean-over-batch gradient of the configured objective.

    ``ce_plus_kl`` needs ``x_adv`` (same shape as ``x``); the gradient flows
    through both the clean and the perturbed forward pass.
    """
    x = _check_input(params, x)
    labels = check_labels(labels, params.spec.num_classes)
    if labels.shape[0] != x.shape[0]:
        raise ShapeError(f"{x.shape[0]} rows but {labels.shape[0]} labels")
    n = x.shape[0]

    logits, acts, pres = forward_cached(params, x)
    loss_rows = ce_values(logits, labels)
    g_clean = ce_logit_grads(logits, labels)

    use_kl = objective.kind == "ce_plus_kl" and objective.kl_weight != 0.0
    if use_kl:
        if x_adv is None:
            raise ValueError("ce_plus_kl objective requires x_adv")
        x_adv = _check_input(params, x_adv)
        if x_adv.shape != x.shape:
            raise ShapeError(f"x_adv {x_adv.shape} does not match x {x.shape}")
        logits_adv, acts_adv, pres_adv = forward_cached(params, x_adv)
        loss_rows = loss_rows + objective.kl_weight * kl_values(logits, logits_adv)
        g_kl_clean, g_kl_adv = kl_logit_grads(logits, logits_adv)
        g_clean = g_clean + objective.kl_weight * g_kl_clean
        grads, _ = backprop(params, acts, pres, g_clean / n)
        grads_adv, _ = backprop(
            params, acts_adv, pres_adv, objective.kl_weight * g_kl_adv / n
        )
        grads = [
            (gw + aw, gb + ab) for (gw, gb), (aw, ab) in zip(grads, grads_adv)
        ]
    else:
        grads, _ = backprop(params, acts, pres, g_clean / n)

    return GradientBundle(grads, float(loss_rows.mean()))


def input_gradient_of_loss_batch(
    params: NetworkParams, x: np.ndarray, labels: np.ndarray
) -> np.ndarray:
    """Per-row gradient of that row's own CE loss w.r.t. the row."""
    logits, acts, pres = forward_cached(params, x)
    _, input_grad = backprop(params, acts, pres, ce_logit_grads(logits, labels))
    return input_grad


def input_gradient_of_loss(params: NetworkParams, x, label: int) -> np.ndarray:
    """Gradient of the CE loss w.r.t. a single input row."""
    x = _check_input(params, x)
    if x.shape[0] != 1:
        raise ShapeError(
            f"input_gradient_of_loss takes a single sample, got {x.shape[0]} rows"
        )
    labels = check_labels([label], params.spec.num_classes)
    return input_gradient_of_loss_batch(params, x, labels)
