"""Run configuration: model hyperparameters plus pipeline and ablation settings.

A config file is a flat JSON object whose keys match the field names below;
command-line flags override file values (later wins).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import ConfigError


@dataclass
class Hyperparams:
    """Model and optimization hyperparameters.

    ``doc_threshold`` gates document-document edges on the embedding dot
    product and ``contrastive_weight`` scales the contrastive term in the
    total loss.
    """

    hidden: int = 200
    window: int = 5
    doc_threshold: float = 2.7
    dropout: float = 0.7
    contrastive_weight: float = 0.7
    lr: float = 5e-4
    weight_decay: float = 1e-3
    max_epochs: int = 1000
    eval_every: int = 5
    entity_min_sim: float = 0.5
    temperature: float = 1.0
    seed: int = 0
    grad_clip: float | None = None

    def validate(self) -> None:
        if not -3.0 <= self.doc_threshold <= 3.0:
            raise ConfigError(f"doc_threshold must be in [-3, 3], got {self.doc_threshold}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.contrastive_weight < 0.0:
            raise ConfigError(
                f"contrastive_weight must be >= 0, got {self.contrastive_weight}"
            )
        if self.temperature <= 0.0:
            raise ConfigError(f"temperature must be > 0, got {self.temperature}")
        if self.hidden < 1 or self.window < 1 or self.max_epochs < 1 or self.eval_every < 1:
            raise ConfigError("hidden, window, max_epochs, eval_every must be >= 1")
        if not -1.0 <= self.entity_min_sim <= 1.0:
            raise ConfigError(f"entity_min_sim must be in [-1, 1], got {self.entity_min_sim}")


@dataclass
class RunConfig(Hyperparams):
    """Hyperparameters plus file paths, preprocessing, and ablation switches."""

    corpus: str | None = None
    morpheme_emb: str | None = None
    entity_emb: str | None = None
    out: str = "ligram_out"
    min_freq: int = 5
    split_per_class: int = 40
    embedding_dim: int | None = None
    missing_embedding: str = "error"
    use_morpheme: bool = True
    use_pos: bool = True
    use_entity: bool = True
    use_semcon: bool = True
    contrastive_scope: str = "all"
    ablate_seeds: list[int] = field(default_factory=list)

    def validate(self) -> None:
        super().validate()
        if not (self.use_morpheme or self.use_pos or self.use_entity):
            raise ConfigError("at least one subgraph must be enabled")
        if self.contrastive_scope not in ("all", "labeled"):
            raise ConfigError(
                f"contrastive_scope must be 'all' or 'labeled', got {self.contrastive_scope!r}"
            )
        if self.missing_embedding not in ("error", "zero-vector"):
            raise ConfigError(
                f"missing_embedding must be 'error' or 'zero-vector', "
                f"got {self.missing_embedding!r}"
            )
        if self.min_freq < 1:
            raise ConfigError(f"min_freq must be >= 1, got {self.min_freq}")

    @property
    def enabled_kinds(self) -> tuple[str, ...]:
        kinds = []
        if self.use_morpheme:
            kinds.append("morpheme")
        if self.use_pos:
            kinds.append("pos")
        if self.use_entity:
            kinds.append("entity")
        return tuple(kinds)

    def hyper(self) -> Hyperparams:
        keys = {f.name for f in fields(Hyperparams)}
        return Hyperparams(**{k: v for k, v in asdict(self).items() if k in keys})

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**values)


def load_config_file(path: str | Path) -> dict:
    """Read a flat JSON key-value config file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        values = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg})") from None
    if not isinstance(values, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return values


def resolve_config(file_values: dict | None, overrides: dict) -> RunConfig:
    """Build a RunConfig from defaults <- config file <- CLI overrides."""
    merged: dict = {}
    if file_values:
        merged.update(file_values)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    config = RunConfig.from_dict(merged)
    config.validate()
    return config
