"""Synthetic planted-shortcut image benchmark and dataset file I/O.

Each sample is a side x side grayscale image, flattened row-major into
[0, 1] features. Three ingredients are planted:

* signal — a class-conditional blob inside ``core_region`` (label 1 lights
  the upper half of the core, label 0 the lower half), the only content
  that transfers across distributions;
* clutter — label-independent random rectangles outside the core;
* shortcut — the four corner pixels written with a label-encoding
  intensity that agrees with the true label with a configurable
  probability (1.0 in the training pool, typically 0.5 off-distribution,
  which makes the corners worthless there).

Gaussian pixel noise is added before clipping; the shortcut corners are
written last, so they stay perfectly clean, which is what makes them such
an attractive crutch for a classifier.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BadMagicError, FileFormatError, UnsupportedVersionError
from .network import _Reader

DATASET_MAGIC = b"SGAD"
DATASET_VERSION = 1
SPLIT_RATIOS = (0.6, 0.2, 0.2)


@dataclass(frozen=True)
class Rect:
    top: int
    left: int
    height: int
    width: int

    def __post_init__(self):
        if self.height < 1 or self.width < 1 or self.top < 0 or self.left < 0:
            raise ValueError(f"degenerate rectangle {self}")

    def indices(self, side: int) -> np.ndarray:
        """Flat row-major pixel indices covered by the rectangle."""
        rows = np.arange(self.top, self.top + self.height)
        cols = np.arange(self.left, self.left + self.width)
        return (rows[:, None] * side + cols[None, :]).reshape(-1)


def _default_core(side: int) -> Rect:
    size = side // 2
    return Rect(side // 4, side // 4, size, size)


@dataclass(frozen=True)
class SyntheticSpec:
    """Geometry, strengths, and correlations of the planted benchmark."""

    side: int = 12
    n_per_class: int = 400
    core_region: Rect | None = None
    signal_strength: float = 0.55
    clutter_strength: float = 0.6
    shortcut_strength: float = 1.0
    shortcut_train_correlation: float = 1.0
    shortcut_ood_correlation: float = 0.5
    noise_sigma: float = 0.3
    seed: int = 0
    ood_easy_negatives: bool = False

    def __post_init__(self):
        if self.side < 4:
            raise ValueError(f"side must be >= 4, got {self.side}")
        if self.n_per_class < 5:
            raise ValueError(f"n_per_class must be >= 5, got {self.n_per_class}")
        if self.core_region is None:
            object.__setattr__(self, "core_region", _default_core(self.side))
        core = self.core_region
        if core.top + core.height > self.side or core.left + core.width > self.side:
            raise ValueError(f"core region {core} exceeds a {self.side}-pixel side")
        for name in ("signal_strength", "clutter_strength", "noise_sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0.0 <= self.shortcut_strength <= 1.0:
            raise ValueError("shortcut_strength must lie in [0, 1]")
        for name in ("shortcut_train_correlation", "shortcut_ood_correlation"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        overlap = set(core.indices(self.side).tolist()) & set(self.shortcut_indices())
        if overlap:
            raise ValueError(
                f"core region and shortcut pixels overlap at indices {sorted(overlap)}"
            )

    @property
    def dim(self) -> int:
        return self.side * self.side

    def shortcut_indices(self) -> frozenset[int]:
        s = self.side
        return frozenset((0, s - 1, (s - 1) * s, s * s - 1))

    def relevant_mask(self) -> np.ndarray:
        mask = np.zeros(self.dim, dtype=bool)
        mask[self.core_region.indices(self.side)] = True
        return mask


@dataclass
class LabeledDataset:
    """Feature matrix in [0,1], binary labels, and ground-truth metadata."""

    features: np.ndarray  # [N x d]
    labels: np.ndarray  # [N], values {0, 1}
    relevant_mask: np.ndarray  # [d] bool
    shortcut_indices: frozenset[int]
    provenance: str = ""

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.relevant_mask = np.asarray(self.relevant_mask, dtype=bool)
        if self.features.ndim != 2:
            raise ValueError(f"features must be [N x d], got {self.features.shape}")
        n, d = self.features.shape
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features must be finite")
        if self.features.min() < 0.0 or self.features.max() > 1.0:
            raise ValueError("features must lie in [0, 1]")
        if self.labels.shape != (n,) or not np.isin(self.labels, (0, 1)).all():
            raise ValueError("labels must be one 0/1 value per row")
        if self.relevant_mask.shape != (d,):
            raise ValueError(f"relevant_mask must have length {d}")
        bad = [i for i in self.shortcut_indices if not 0 <= i < d]
        if bad:
            raise ValueError(f"shortcut indices out of range: {bad}")
        if any(self.relevant_mask[i] for i in self.shortcut_indices):
            raise ValueError("relevant_mask and shortcut_indices must be disjoint")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices, provenance: str) -> "LabeledDataset":
        return LabeledDataset(
            self.features[indices].copy(),
            self.labels[indices].copy(),
            self.relevant_mask.copy(),
            self.shortcut_indices,
            provenance,
        )


def _synth_samples(
    spec: SyntheticSpec,
    n_per_class: int,
    correlation: float,
    rng: np.random.Generator,
    easy_negatives: bool,
):
    side = spec.side
    core = spec.core_region.indices(side)
    upper_half = Rect(
        spec.core_region.top,
        spec.core_region.left,
        spec.core_region.height // 2,
        spec.core_region.width,
    ).indices(side)
    lower_half = np.setdiff1d(core, upper_half)
    corners = sorted(spec.shortcut_indices())
    rect_max = max(2, side // 3)

    labels = np.repeat([0, 1], n_per_class)
    features = np.zeros((labels.size, spec.dim))
    for i, y in enumerate(labels):
        img = np.zeros(spec.dim)
        # clutter: a few random rectangles, then wiped off the core
        for _ in range(int(rng.integers(2, 5))):
            h = int(rng.integers(2, rect_max + 1))
            w = int(rng.integers(2, rect_max + 1))
            top = int(rng.integers(0, side - h + 1))
            left = int(rng.integers(0, side - w + 1))
            amp = rng.uniform(0.2, 1.0) * spec.clutter_strength
            img[Rect(top, left, h, w).indices(side)] += amp
        img[core] = 0.0
        img[upper_half if y == 1 else lower_half] += spec.signal_strength
        sigma = spec.noise_sigma
        if easy_negatives and y == 0:
            sigma *= 0.25  # off-distribution negatives can be cleaner than IID ones
        img += rng.normal(0.0, sigma, size=spec.dim)
        img = np.clip(img, 0.0, 1.0)
        encoded = y if rng.uniform() < correlation else 1 - y
        img[corners] = spec.shortcut_strength if encoded == 1 else 0.0
        features[i] = img
    return features, labels


def generate(spec: SyntheticSpec):
    """Build (train, val, test_iid, test_ood).

    The IID pool (shortcut correlation ``shortcut_train_correlation``) is
    split 6:2:2 stratified; the OOD set is generated separately at
    ``shortcut_ood_correlation`` with one-fifth of the pool's size per
    class, mirroring the IID test split.
    """
    rng = np.random.default_rng(spec.seed)
    feats, labels = _synth_samples(
        spec, spec.n_per_class, spec.shortcut_train_correlation, rng, False
    )
    pool = LabeledDataset(
        feats,
        labels,
        spec.relevant_mask(),
        spec.shortcut_indices(),
        provenance=f"synthetic side={spec.side} seed={spec.seed} pool",
    )
    train, val, test_iid = split(pool, SPLIT_RATIOS, spec.seed)
    n_ood = max(1, int(round(SPLIT_RATIOS[2] * spec.n_per_class)))
    ood_feats, ood_labels = _synth_samples(
        spec, n_ood, spec.shortcut_ood_correlation, rng, spec.ood_easy_negatives
    )
    test_ood = LabeledDataset(
        ood_feats,
        ood_labels,
        spec.relevant_mask(),
        spec.shortcut_indices(),
        provenance=f"synthetic side={spec.side} seed={spec.seed} ood",
    )
    return train, val, test_iid, test_ood


def split(dataset: LabeledDataset, ratios, seed: int):
    """Disjoint, exhaustive, per-class stratified partition."""
    ratios = [float(r) for r in ratios]
    if any(r <= 0 for r in ratios):
        raise ValueError(f"ratios must be positive, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)!r}")
    rng = np.random.default_rng(seed)
    parts: list[list[np.ndarray]] = [[] for _ in ratios]
    for cls in (0, 1):
        idx = np.flatnonzero(dataset.labels == cls)
        idx = idx[rng.permutation(idx.size)]
        bounds = [0]
        cum = 0.0
        for r in ratios[:-1]:
            cum += r
            bounds.append(int(np.floor(cum * idx.size + 0.5)))
        bounds.append(idx.size)
        for part, (lo, hi) in zip(parts, zip(bounds[:-1], bounds[1:])):
            part.append(idx[lo:hi])
    out = []
    for i, part in enumerate(parts):
        merged = np.concatenate(part)
        if merged.size == 0:
            raise ValueError(f"split {i} (ratio {ratios[i]}) would be empty")
        merged = merged[rng.permutation(merged.size)]
        out.append(dataset.subset(merged, f"{dataset.provenance}/split{i}"))
    return out


# --- dataset file I/O -------------------------------------------------------
#
# Binary little-endian layout:
#   magic "SGAD" | version u32 | N u32 | d u32 |
#   features f64 row-major [N*d] | labels u8 [N] |
#   relevant_mask u8 [d] (one byte per feature, 0/1) |
#   shortcut count u32 | shortcut indices u32 each (ascending)


def save_dataset(dataset: LabeledDataset, path) -> None:
    out = bytearray()
    out += DATASET_MAGIC
    out += struct.pack("<I", DATASET_VERSION)
    out += struct.pack("<II", dataset.n, dataset.dim)
    out += np.ascontiguousarray(dataset.features, dtype="<f8").tobytes()
    out += dataset.labels.astype(np.uint8).tobytes()
    out += dataset.relevant_mask.astype(np.uint8).tobytes()
    shortcut = sorted(dataset.shortcut_indices)
    out += struct.pack("<I", len(shortcut))
    for i in shortcut:
        out += struct.pack("<I", i)
    Path(path).write_bytes(bytes(out))


def load_dataset(path) -> LabeledDataset:
    blob = Path(path).read_bytes()
    r = _Reader(blob, "dataset file")
    magic = r.take(4)
    if magic != DATASET_MAGIC:
        raise BadMagicError(
            f"dataset file: expected magic {DATASET_MAGIC!r}, found {magic!r}"
        )
    version = r.u32()
    if version != DATASET_VERSION:
        raise UnsupportedVersionError(
            f"dataset file: version {version} unsupported (expected {DATASET_VERSION})"
        )
    n = r.u32()
    d = r.u32()
    features = r.f64_array(n * d, (n, d))
    labels = np.frombuffer(r.take(n), dtype=np.uint8).astype(np.int64)
    mask = np.frombuffer(r.take(d), dtype=np.uint8).astype(bool)
    shortcut = frozenset(r.u32() for _ in range(r.u32()))
    if r.pos != len(blob):
        raise FileFormatError(
            f"dataset file: {len(blob) - r.pos} unexpected trailing bytes"
        )
    return LabeledDataset(features, labels, mask, shortcut, provenance=str(path))
