"""Saliency-guided adversarial training, its baselines, and a synthetic
planted-shortcut benchmark for measuring IID-to-OOD generalization.
"""

from .ablation import AblationReport, ablate
from .attack import AttackSpec, Perturbation, apply_perturbation, fgsm, sample_epsilon
from .data import (
    LabeledDataset,
    Rect,
    SyntheticSpec,
    generate,
    load_dataset,
    save_dataset,
    split,
)
from .errors import (
    BadMagicError,
    ConfigError,
    FileFormatError,
    NumericBlowupError,
    ShapeError,
    TruncatedFileError,
    UnsupportedVersionError,
)
from .masking import (
    MaskSpec,
    MaskedInput,
    SaliencyMap,
    compute_and_mask,
    mask_bottom_k,
    sort_ascending,
)
from .metrics import (
    EvalReport,
    auroc,
    degradation,
    evaluate,
    roc_area,
    roc_points,
    saliency_overlap,
)
from .network import (
    GradientBundle,
    NetworkParams,
    NetworkSpec,
    as_tensor,
    forward,
    init_params,
    input_gradient,
    load_model,
    save_model,
    sgd_step,
)
from .objectives import (
    ObjectiveSpec,
    cross_entropy,
    input_gradient_of_loss,
    kl_divergence,
    loss_and_param_grads,
    sga_objective,
    softmax,
)
from .runconfig import RunConfig, emit_config, load_config, parse_config
from .training import TrainConfig, TrainLog, train, write_train_log

__all__ = [name for name in dir() if not name.startswith("_")]
