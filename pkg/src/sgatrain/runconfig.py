"""Flat key=value run configuration.

One ``key = value`` pair per line, ``#`` starts a comment anywhere,
unknown or duplicate keys are rejected. Emitting and re-parsing a config
reproduces it exactly, so a run is fully described by its file.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .data import Rect, SyntheticSpec
from .errors import ConfigError
from .network import NetworkSpec
from .training import TrainConfig


@dataclass(frozen=True)
class RunConfig:
    # training
    method: str = "sga"
    epochs: int = 30
    batch_size: int = 64
    learning_rate: float = 0.05
    k_fraction: float = 0.1
    lambda_: float = 1.0  # config key "lambda": weight of the KL term
    epsilon_low: float = 0.01
    epsilon_high: float = 0.05
    seed: int = 0
    hidden_dims: tuple[int, ...] = (64,)
    # synthetic data
    side: int = 12
    n_per_class: int = 400
    core_top: int = 3
    core_left: int = 3
    core_height: int = 6
    core_width: int = 6
    signal_strength: float = 0.55
    clutter_strength: float = 0.6
    shortcut_strength: float = 1.0
    shortcut_train_correlation: float = 1.0
    shortcut_ood_correlation: float = 0.5
    noise_sigma: float = 0.3
    data_seed: int = 0
    ood_easy_negatives: bool = False

    def to_train_config(self) -> TrainConfig:
        return TrainConfig(
            method=self.method,
            network=NetworkSpec(self.side * self.side, self.hidden_dims, 2),
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            k_fraction=self.k_fraction,
            kl_weight=self.lambda_,
            epsilon_low=self.epsilon_low,
            epsilon_high=self.epsilon_high,
            seed=self.seed,
        )

    def to_synthetic_spec(self) -> SyntheticSpec:
        return SyntheticSpec(
            side=self.side,
            n_per_class=self.n_per_class,
            core_region=Rect(
                self.core_top, self.core_left, self.core_height, self.core_width
            ),
            signal_strength=self.signal_strength,
            clutter_strength=self.clutter_strength,
            shortcut_strength=self.shortcut_strength,
            shortcut_train_correlation=self.shortcut_train_correlation,
            shortcut_ood_correlation=self.shortcut_ood_correlation,
            noise_sigma=self.noise_sigma,
            seed=self.data_seed,
            ood_easy_negatives=self.ood_easy_negatives,
        )


def _key_of(field_name: str) -> str:
    return "lambda" if field_name == "lambda_" else field_name


_FIELDS = {_key_of(f.name): f for f in fields(RunConfig)}


def _parse_value(key: str, raw: str):
    f = _FIELDS[key]
    try:
        if f.type == "bool":
            if raw not in ("true", "false"):
                raise ValueError("expected true or false")
            return raw == "true"
        if f.type == "int":
            return int(raw)
        if f.type == "float":
            return float(raw)
        if f.type == "str":
            return raw
        # tuple[int, ...]
        return tuple(int(part) for part in raw.split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})") from None


def _format_value(key: str, value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config(text: str) -> RunConfig:
    seen: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, _, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen[key] = _parse_value(key, raw)
    kwargs = {_FIELDS[k].name: v for k, v in seen.items()}
    try:
        return RunConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def emit_config(config: RunConfig) -> str:
    lines = []
    for key, f in _FIELDS.items():
        lines.append(f"{key} = {_format_value(key, getattr(config, f.name))}")
    return "\n".join(lines) + "\n"


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)
