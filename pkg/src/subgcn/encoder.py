"""Two-layer GCN channels with cross-graph shared weights and exact hand-derived gradients."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .matrices import (NormalizedAdjacency, SparseMatrix, read_dense_text,
                       read_sparse_text, write_dense_text, write_sparse_text)

CHANNEL_KINDS = ("structure", "attribute", "subgraph")
FINAL_ACTIVATIONS = ("identity", "relu")


class CheckpointError(Exception):
    """Checkpoint directory is missing, malformed, or inconsistent with the config."""


@dataclass(frozen=True)
class GcnChannelConfig:
    """Shape and activation specification for one embedding channel.

    The first layer applies ReLU; the output layer applies
    ``final_activation`` (identity by default so embeddings keep both signs
    for L1 margin separation, "relu" for the clamped variant).  Inputs are
    trainable only for the structure channel.
    """

    kind: str
    input_dim: int
    hidden_dim: int
    output_dim: int
    final_activation: str = "identity"

    def __post_init__(self):
        if self.kind not in CHANNEL_KINDS:
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if self.final_activation not in FINAL_ACTIVATIONS:
            raise ValueError(f"unknown final activation {self.final_activation!r}")
        if min(self.input_dim, self.hidden_dim, self.output_dim) <= 0:
            raise ValueError("channel dimensions must be positive")
        if self.kind == "structure" and not (
                self.input_dim == self.hidden_dim == self.output_dim):
            raise ValueError("structure channel requires input = hidden = output dim")

    @property
    def input_trainable(self) -> bool:
        return self.kind == "structure"


@dataclass
class ChannelGradients:
    dW1: np.ndarray
    dW2: np.ndarray
    dH0_kg1: np.ndarray | None
    dH0_kg2: np.ndarray | None


class GcnChannel:
    """One embedding channel over two graphs sharing the same weight matrices.

    forward() computes, per graph, H1 = relu(A (H0 W1)) and
    H2 = act2(A (H1 W2)) with A the normalized adjacency; backward()
    accumulates exact gradients from both graphs into the shared dW1/dW2.
    """

    def __init__(self, config: GcnChannelConfig, weights1: np.ndarray,
                 weights2: np.ndarray, input_kg1, input_kg2, rng_seed):
        self.config = config
        self.W1 = np.asarray(weights1, dtype=np.float64)
        self.W2 = np.asarray(weights2, dtype=np.float64)
        if self.W1.shape != (config.input_dim, config.hidden_dim):
            raise ValueError("W1 shape mismatch")
        if self.W2.shape != (config.hidden_dim, config.output_dim):
            raise ValueError("W2 shape mismatch")
        self.inputs = [input_kg1, input_kg2]
        self.rng_seed = rng_seed
        self._cache: list[dict] | None = None
        for side in (0, 1):
            h0 = self.inputs[side]
            cols = h0.shape[1] if isinstance(h0, np.ndarray) else h0.cols
            if cols != config.input_dim:
                raise ValueError("input feature width does not match input_dim")

    @property
    def kind(self) -> str:
        return self.config.kind

    def n_entities(self, side: int) -> int:
        h0 = self.inputs[side]
        return h0.shape[0] if isinstance(h0, np.ndarray) else h0.rows

    def _project_input(self, side: int) -> np.ndarray:
        h0 = self.inputs[side]
        if isinstance(h0, np.ndarray):
            return h0 @ self.W1
        return h0.spmm(self.W1)

    def forward(self, adj_kg1: NormalizedAdjacency, adj_kg2: NormalizedAdjacency
                ) -> tuple[np.ndarray, np.ndarray]:
        cache = []
        outputs = []
        for side, adj in enumerate((adj_kg1, adj_kg2)):
            if adj.n != self.n_entities(side):
                raise ValueError(f"adjacency size {adj.n} does not match entity count "
                                 f"{self.n_entities(side)} for graph {side + 1}")
            z1 = adj.spmm(self._project_input(side))
            h1 = np.maximum(z1, 0.0)
            z2 = adj.spmm(h1 @ self.W2)
            h2 = z2 if self.config.final_activation == "identity" else np.maximum(z2, 0.0)
            if not np.isfinite(h2).all():
                raise FloatingPointError(
                    f"non-finite embedding values in {self.kind} channel forward pass")
            cache.append({"adj": adj, "z1": z1, "h1": h1, "z2": z2})
            outputs.append(h2)
        self._cache = cache
        return outputs[0], outputs[1]

    def backward(self, grad_kg1: np.ndarray, grad_kg2: np.ndarray) -> ChannelGradients:
        if self._cache is None:
            raise RuntimeError("backward called before forward")
        dW1 = np.zeros_like(self.W1)
        dW2 = np.zeros_like(self.W2)
        dH0 = [None, None]
        for side, grad in enumerate((grad_kg1, grad_kg2)):
            state = self._cache[side]
            if grad.shape != state["z2"].shape:
                raise ValueError("gradient shape mismatch")
            dz2 = grad if self.config.final_activation == "identity" \
                else grad * (state["z2"] > 0.0)
            # z2 = A (h1 W2); A is exactly symmetric so A^T = A
            m2 = state["adj"].spmm(dz2)
            dW2 += state["h1"].T @ m2
            dh1 = m2 @ self.W2.T
            dz1 = dh1 * (state["z1"] > 0.0)
            m1 = state["adj"].spmm(dz1)
            h0 = self.inputs[side]
            if isinstance(h0, np.ndarray):
                dW1 += h0.T @ m1
            else:
                dW1 += h0.spmm_t(m1)
            if self.config.input_trainable:
                dH0[side] = m1 @ self.W1.T
        return ChannelGradients(dW1=dW1, dW2=dW2, dH0_kg1=dH0[0], dH0_kg2=dH0[1])

    def apply_update(self, grads: ChannelGradients, step: float) -> None:
        self.W1 -= step * grads.dW1
        self.W2 -= step * grads.dW2
        if self.config.input_trainable:
            self.inputs[0] -= step * grads.dH0_kg1
            self.inputs[1] -= step * grads.dH0_kg2


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init_channel(config: GcnChannelConfig, input_kg1, input_kg2,
                 rng_seed) -> GcnChannel:
    """Seeded initialization: Glorot-uniform weights; the structure channel draws
    trainable inputs in [-1/sqrt(d), 1/sqrt(d)], the others take fixed sparse
    features (zero-padded on the right up to input_dim)."""
    rng = np.random.default_rng(rng_seed)
    w1 = _glorot(rng, config.input_dim, config.hidden_dim)
    w2 = _glorot(rng, config.hidden_dim, config.output_dim)
    inputs = []
    for source in (input_kg1, input_kg2):
        if config.kind == "structure":
            n = int(source)
            bound = 1.0 / np.sqrt(config.input_dim)
            inputs.append(rng.uniform(-bound, bound, size=(n, config.input_dim)))
        else:
            if not isinstance(source, SparseMatrix):
                raise TypeError(f"{config.kind} channel expects SparseMatrix inputs")
            if source.cols > config.input_dim:
                raise ValueError(
                    f"{config.kind} features have {source.cols} columns, which exceeds "
                    f"the configured input_dim {config.input_dim}")
            inputs.append(source.with_cols(config.input_dim))
    return GcnChannel(config, w1, w2, inputs[0], inputs[1], rng_seed)


def save_channel(channel: GcnChannel, directory, epoch: int) -> None:
    """Checkpoint layout: manifest.json plus each tensor in the dense text format.
    Values round-trip bit-exactly."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "kind": channel.config.kind,
        "input_dim": channel.config.input_dim,
        "hidden_dim": channel.config.hidden_dim,
        "output_dim": channel.config.output_dim,
        "final_activation": channel.config.final_activation,
        "rng_seed": channel.rng_seed,
        "epoch": epoch,
    }
    with (directory / "manifest.json").open("w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_dense_text(channel.W1, directory / "W1.txt")
    write_dense_text(channel.W2, directory / "W2.txt")
    for side, name in ((0, "input_kg1.txt"), (1, "input_kg2.txt")):
        h0 = channel.inputs[side]
        if isinstance(h0, np.ndarray):
            write_dense_text(h0, directory / name)
        else:
            write_sparse_text(h0, directory / name)


def load_channel(directory, input_kg1=None, input_kg2=None
                 ) -> tuple[GcnChannel, int]:
    """Restore a checkpoint.

    Checkpoints are self-contained; explicitly passed fixed-input features only
    serve as a fallback when the input files are absent.
    """
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise CheckpointError(f"missing checkpoint manifest: {manifest_path}")
    with manifest_path.open("r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    try:
        config = GcnChannelConfig(
            kind=manifest["kind"],
            input_dim=manifest["input_dim"],
            hidden_dim=manifest["hidden_dim"],
            output_dim=manifest["output_dim"],
            final_activation=manifest["final_activation"],
        )
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"bad checkpoint manifest {manifest_path}: {exc}") from exc
    w1 = read_dense_text(directory / "W1.txt")
    w2 = read_dense_text(directory / "W2.txt")
    inputs = []
    for provided, name in ((input_kg1, "input_kg1.txt"), (input_kg2, "input_kg2.txt")):
        path = directory / name
        if path.exists():
            inputs.append(read_dense_text(path) if config.input_trainable
                          else read_sparse_text(path))
        elif provided is not None and not config.input_trainable:
            if provided.cols > config.input_dim:
                raise CheckpointError(
                    f"input features have {provided.cols} columns but the checkpoint "
                    f"was trained with input_dim {config.input_dim}")
            inputs.append(provided.with_cols(config.input_dim))
        else:
            raise CheckpointError(
                f"{config.kind} checkpoint is missing {name} and no fixed input "
                "features were supplied")
    try:
        channel = GcnChannel(config, w1, w2, inputs[0], inputs[1],
                             manifest.get("rng_seed"))
    except ValueError as exc:
        raise CheckpointError(f"inconsistent checkpoint {directory}: {exc}") from exc
    return channel, int(manifest["epoch"])


@dataclass(frozen=True)
class EmbeddingSet:
    """Output embeddings per graph and channel kind; rows match entity counts."""

    kg1: dict[str, np.ndarray]
    kg2: dict[str, np.ndarray]

    def __post_init__(self):
        for side_name, side in (("kg1", self.kg1), ("kg2", self.kg2)):
            rows = {arr.shape[0] for arr in side.values()}
            if len(rows) > 1:
                raise ValueError(f"{side_name} embeddings disagree on entity count")
            for kind, arr in side.items():
                if not np.isfinite(arr).all():
                    raise ValueError(f"non-finite values in {side_name} {kind} embeddings")

    def dims(self) -> dict[str, int]:
        return {kind: arr.shape[1] for kind, arr in self.kg1.items()}
