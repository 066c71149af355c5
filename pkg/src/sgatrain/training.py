"""Training loop and the four per-minibatch methods.

Methods:
  nt  — cross-entropy on the clean batch;
  at  — cross-entropy on FGSM-perturbed clean inputs only;
  sg  — CE(clean) + kl_weight * KL(clean || masked), masking the bottom-k
        saliency features with fresh uniform draws each occurrence;
  sga — CE(clean) + kl_weight * KL(clean || masked-then-FGSM-perturbed).

The masked/perturbed inputs are built with the current parameters and then
treated as data: the gradient flows through every forward pass of the loss,
not through the construction of the inputs. One epsilon is drawn per
minibatch (after the mask draws); mask draws fill row-major so the batched
step consumes the generator exactly like a per-sample loop.

Features are assumed to live in [0, 1] (the dataset invariant); that range
is also the mask redraw range and the post-perturbation clamp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .attack import AttackSpec, fgsm_batch, sample_epsilon
from .data import LabeledDataset
from .errors import NumericBlowupError, ShapeError
from .masking import MaskSpec, mask_batch
from .metrics import auroc, positive_scores
from .network import (
    GradientBundle,
    NetworkParams,
    NetworkSpec,
    backprop,
    forward,
    forward_cached,
    init_params,
    input_gradient_batch,
    sgd_step,
)
from .objectives import (
    ObjectiveSpec,
    composite_values,
    ce_logit_grads,
    kl_logit_grads,
    loss_and_param_grads,
)

DATA_LOW = 0.0
DATA_HIGH = 1.0

METHODS = ("nt", "at", "sg", "sga")


@dataclass(frozen=True)
class TrainConfig:
    method: str
    network: NetworkSpec
    epochs: int = 30
    batch_size: int = 64
    learning_rate: float = 0.05
    k_fraction: float = 0.1
    kl_weight: float = 1.0
    epsilon_low: float = 0.01
    epsilon_high: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0.0 <= self.k_fraction <= 1.0:
            raise ValueError(f"k_fraction must lie in [0, 1], got {self.k_fraction}")
        if self.kl_weight < 0:
            raise ValueError(f"kl_weight must be >= 0, got {self.kl_weight}")
        if not 0.0 <= self.epsilon_low <= self.epsilon_high:
            raise ValueError("need 0 <= epsilon_low <= epsilon_high")

    def mask_spec(self) -> MaskSpec:
        return MaskSpec(self.k_fraction, DATA_LOW, DATA_HIGH)

    def attack_spec(self) -> AttackSpec:
        return AttackSpec(self.epsilon_low, self.epsilon_high, DATA_LOW, DATA_HIGH)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_auroc: float


@dataclass
class TrainLog:
    records: list[EpochRecord]
    selected_epoch: int  # 1-based; argmax of val AUROC, first occurrence on ties


def nt_step(params, x, labels, config, rng) -> GradientBundle:
    """Plain cross-entropy gradient on the clean batch."""
    return loss_and_param_grads(params, x, labels, ObjectiveSpec("ce_only"))


def at_step(params, x, labels, config, rng) -> GradientBundle:
    """CE gradient on the FGSM-perturbed batch (no masking, no KL)."""
    eps = sample_epsilon(rng, config.attack_spec())
    x_adv = fgsm_batch(params, x, labels, eps, config.attack_spec())
    return loss_and_param_grads(params, x_adv, labels, ObjectiveSpec("ce_only"))


def _consistency_grads(params, x, labels, x_pert, kl_weight) -> GradientBundle:
    """Mean gradient of CE(x) + kl_weight * KL(f(x) || f(x_pert))."""
    n = x.shape[0]
    logits, acts, pres = forward_cached(params, x)
    logits_p, acts_p, pres_p = forward_cached(params, x_pert)
    loss_rows = composite_values(logits, logits_p, labels, kl_weight)
    g_kl_clean, g_kl_pert = kl_logit_grads(logits, logits_p)
    g_clean = (ce_logit_grads(logits, labels) + kl_weight * g_kl_clean) / n
    grads, _ = backprop(params, acts, pres, g_clean)
    grads_p, _ = backprop(params, acts_p, pres_p, kl_weight * g_kl_pert / n)
    merged = [(gw + pw, gb + pb) for (gw, gb), (pw, pb) in zip(grads, grads_p)]
    return GradientBundle(merged, float(loss_rows.mean()))


def sg_step(params, x, labels, config, rng) -> GradientBundle:
    """Mask the bottom-k saliency features, regularize toward the clean output.

    kl_weight == 0 skips the construction entirely (no rng consumed), so
    such a run is step-identical to nt.
    """
    if config.kl_weight == 0.0:
        return nt_step(params, x, labels, config, rng)
    saliency = input_gradient_batch(params, x, labels)
    x_masked = mask_batch(x, saliency, config.mask_spec(), rng)
    return _consistency_grads(params, x, labels, x_masked, config.kl_weight)


def sga_step(params, x, labels, config, rng) -> GradientBundle:
    """Mask, then FGSM-perturb the masked batch, then the consistency loss."""
    if config.kl_weight == 0.0:
        return nt_step(params, x, labels, config, rng)
    saliency = input_gradient_batch(params, x, labels)
    x_masked = mask_batch(x, saliency, config.mask_spec(), rng)
    eps = sample_epsilon(rng, config.attack_spec())
    x_adv = fgsm_batch(params, x_masked, labels, eps, config.attack_spec())
    return _consistency_grads(params, x, labels, x_adv, config.kl_weight)


STEP_FNS = {"nt": nt_step, "at": at_step, "sg": sg_step, "sga": sga_step}


def train(config: TrainConfig, train_set: LabeledDataset, val_set: LabeledDataset):
    """Run the epoch x minibatch loop; return the best-validation checkpoint.

    Each epoch visits every training sample exactly once (seeded shuffle,
    short final batch kept) and ends with a validation AUROC. Fully
    deterministic given the config: the init stream is seeded with
    ``seed`` and the shuffle/mask/epsilon stream with ``[seed, 1]``.
    """
    for name, ds in (("train", train_set), ("validation", val_set)):
        if ds.n == 0:
            raise ValueError(f"{name} set is empty")
        if ds.dim != config.network.input_dim:
            raise ShapeError(
                f"{name} features have {ds.dim} columns but the network "
                f"expects {config.network.input_dim}"
            )
    if config.network.num_classes != 2:
        raise ValueError("training expects a binary classifier network")
    if len(set(val_set.labels.tolist())) < 2:
        raise ValueError("validation set must contain both classes")

    step = STEP_FNS[config.method]
    params = init_params(config.network, config.seed)
    rng = np.random.default_rng([config.seed, 1])
    n = train_set.n
    records: list[EpochRecord] = []
    best_auroc = -math.inf
    best_params = params
    best_epoch = 0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            bundle = step(
                params, train_set.features[idx], train_set.labels[idx], config, rng
            )
            params = sgd_step(params, bundle, config.learning_rate)
            loss_sum += bundle.loss_value * idx.size
        train_loss = loss_sum / n
        if not math.isfinite(train_loss):
            raise NumericBlowupError(epoch)
        val_auroc = auroc(positive_scores(params, val_set.features), val_set.labels)
        records.append(EpochRecord(epoch, train_loss, val_auroc))
        if val_auroc > best_auroc:
            best_auroc = val_auroc
            best_params = params
            best_epoch = epoch
    return best_params, TrainLog(records, best_epoch)


def write_train_log(log: TrainLog, path) -> None:
    with open(path, "w") as fh:
        fh.write("epoch,train_loss,val_auroc,selected\n")
        for rec in log.records:
            flag = 1 if rec.epoch == log.selected_epoch else 0
            fh.write(f"{rec.epoch},{rec.train_loss!r},{rec.val_auroc!r},{flag}\n")


def train_accuracy(params: NetworkParams, dataset: LabeledDataset) -> float:
    """Fraction of samples whose argmax logit matches the label."""
    logits = forward(params, dataset.features)
    return float((logits.argmax(axis=1) == dataset.labels).mean())
