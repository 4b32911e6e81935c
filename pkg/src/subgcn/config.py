"""Run configuration: documented keys, defaults, and the flat key = value file format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .alignment import AlignmentConfig
from .training import TrainingConfig


class ConfigError(Exception):
    """Unknown key, unparsable value, or inconsistent configuration."""


MODES = ("se", "se+ae", "sub-gcn")

MODE_CHANNELS = {
    "se": ("structure",),
    "se+ae": ("structure", "attribute"),
    "sub-gcn": ("structure", "attribute", "subgraph"),
}

# Distance weights used when a mode drops channels; the full three-channel
# weighting comes from the run configuration itself.
MODE_WEIGHTS = {
    "se": (1.0, 0.0, 0.0),
    "se+ae": (0.8, 0.2, 0.0),
}


def _parse_mode(text: str) -> str:
    if text not in MODES:
        raise ValueError(f"must be one of {', '.join(MODES)}")
    return text


def _parse_levels(text) -> tuple[int, ...]:
    if isinstance(text, (tuple, list)):
        return tuple(int(x) for x in text)
    return tuple(int(part) for part in str(text).split(",") if part.strip())


@dataclass(frozen=True)
class RunConfig:
    """Every knob of a run.  Defaults follow the reference experiment setup:
    200-dim structure and 100-dim attribute/subgraph embeddings, margin 3 per
    channel, 20 negatives per side, 5000 epochs, 30% train seeds, and distance
    weights 0.72 / 0.2 / 0.08."""

    dataset_dir: str = ""
    out_dir: str = "run_out"
    mode: str = "sub-gcn"
    structure_dim: int = 200
    attribute_dim: int = 100
    subgraph_dim: int = 100
    margin_structure: float = 3.0
    margin_attribute: float = 3.0
    margin_subgraph: float = 3.0
    negatives_per_side: int = 20
    epochs: int = 5000
    learning_rate: float = 1.0
    resample_every: int = 10
    train_fraction: float = 0.30
    rng_seed: int = 42
    alpha: float = 0.72
    beta: float = 0.2
    gamma_weight: float = 0.08
    hits_levels: tuple[int, ...] = (1, 10, 50)
    attribute_vocab_cap: int = 2000
    adjacency_floor: float = 0.3
    final_activation: str = "identity"
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}, got {self.mode!r}")
        try:
            self.training_config()
            self.alignment_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def channels(self) -> tuple[str, ...]:
        return MODE_CHANNELS[self.mode]

    def training_config(self) -> TrainingConfig:
        return TrainingConfig(
            margin_structure=self.margin_structure,
            margin_attribute=self.margin_attribute,
            margin_subgraph=self.margin_subgraph,
            negatives_per_side=self.negatives_per_side,
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            rng_seed=self.rng_seed,
            resample_every=self.resample_every,
            channels=self.channels,
            checkpoint_every=self.checkpoint_every,
        )

    def alignment_config(self, mode: str | None = None) -> AlignmentConfig:
        mode = mode or self.mode
        if mode in MODE_WEIGHTS:
            alpha, beta, gamma = MODE_WEIGHTS[mode]
        else:
            alpha, beta, gamma = self.alpha, self.beta, self.gamma_weight
        return AlignmentConfig(alpha=alpha, beta=beta, gamma_weight=gamma,
                               hits_levels=self.hits_levels)

    def replace(self, **updates) -> "RunConfig":
        return dataclasses.replace(self, **updates)

    def to_mapping(self) -> dict:
        out = dataclasses.asdict(self)
        out["hits_levels"] = ",".join(str(level) for level in self.hits_levels)
        return out

    def to_file(self, path) -> None:
        path = Path(path)
        with path.open("w", encoding="utf-8") as fh:
            fh.write("# run configuration (key = value per line)\n")
            for key, value in self.to_mapping().items():
                fh.write(f"{key} = {value}\n")


_PARSERS = {
    "dataset_dir": str,
    "out_dir": str,
    "mode": _parse_mode,
    "structure_dim": int,
    "attribute_dim": int,
    "subgraph_dim": int,
    "margin_structure": float,
    "margin_attribute": float,
    "margin_subgraph": float,
    "negatives_per_side": int,
    "epochs": int,
    "learning_rate": float,
    "resample_every": int,
    "train_fraction": float,
    "rng_seed": int,
    "alpha": float,
    "beta": float,
    "gamma_weight": float,
    "hits_levels": _parse_levels,
    "attribute_vocab_cap": int,
    "adjacency_floor": float,
    "final_activation": str,
    "checkpoint_every": int,
}


def config_from_mapping(mapping: dict) -> RunConfig:
    """Build a RunConfig from string or typed values; unknown keys are rejected."""
    values = {}
    for key, raw in mapping.items():
        if key not in _PARSERS:
            raise ConfigError(f"unknown configuration key {key!r}")
        try:
            values[key] = _PARSERS[key](raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})") from exc
    return RunConfig(**values)


def load_config(path) -> RunConfig:
    """Parse the flat text format: `key = value` lines, `#` comment lines."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"configuration file not found: {path}")
    mapping: dict[str, str] = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = stripped.partition("=")
            key = key.strip()
            if key in mapping:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            mapping[key] = value.strip()
    return config_from_mapping(mapping)
