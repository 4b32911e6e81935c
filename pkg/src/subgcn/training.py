"""Negative sampling, margin-ranking losses, and the per-channel SGD training loop."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .encoder import CHANNEL_KINDS, GcnChannel, save_channel
from .matrices import NormalizedAdjacency

CHANNEL_INDEX = {kind: i for i, kind in enumerate(CHANNEL_KINDS)}


class TrainingError(Exception):
    """Training aborted (divergence or invalid configuration)."""


@dataclass(frozen=True)
class TrainingConfig:
    margin_structure: float = 3.0
    margin_attribute: float = 3.0
    margin_subgraph: float = 3.0
    negatives_per_side: int = 20
    epochs: int = 5000
    learning_rate: float = 1.0
    rng_seed: int = 42
    resample_every: int = 10
    channels: tuple[str, ...] = CHANNEL_KINDS
    checkpoint_every: int = 0

    def __post_init__(self):
        if min(self.margin_structure, self.margin_attribute, self.margin_subgraph) <= 0:
            raise ValueError("margins must be positive")
        if self.negatives_per_side < 1:
            raise ValueError("negatives_per_side must be at least 1")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.resample_every < 1:
            raise ValueError("resample_every must be at least 1")
        unknown = set(self.channels) - set(CHANNEL_KINDS)
        if unknown:
            raise ValueError(f"unknown channels: {sorted(unknown)}")
        if not self.channels:
            raise ValueError("at least one channel must be trained")

    def margin_for(self, kind: str) -> float:
        return {"structure": self.margin_structure,
                "attribute": self.margin_attribute,
                "subgraph": self.margin_subgraph}[kind]


def channel_init_seed(master_seed: int, kind: str) -> list[int]:
    """Seed stream for channel parameter initialization."""
    return [master_seed, CHANNEL_INDEX[kind], 0]


def negative_stream_seed(master_seed: int, kind: str) -> list[int]:
    """Seed stream for negative sampling, independent per channel."""
    return [master_seed, CHANNEL_INDEX[kind], 1]


@dataclass(frozen=True)
class NegativeBatch:
    """Per positive pair (e, v): k left replacements (e', v) and k right (e, v')."""

    left_entities: np.ndarray    # (m, k) corrupted graph-1 entities
    right_entities: np.ndarray   # (m, k) corrupted graph-2 entities

    @property
    def k(self) -> int:
        return self.left_entities.shape[1]


def sample_negatives(train_pairs: np.ndarray, n_entities_kg1: int,
                     n_entities_kg2: int, k: int,
                     rng: np.random.Generator) -> NegativeBatch:
    """Uniform corruption over each graph's full entity set; collisions with the
    positive pair are rejection-resampled."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if n_entities_kg1 < 2 or n_entities_kg2 < 2:
        raise ValueError("cannot corrupt pairs in a graph with fewer than 2 entities")
    m = len(train_pairs)

    def _draw(n: int, positives: np.ndarray) -> np.ndarray:
        out = rng.integers(0, n, size=(m, k), dtype=np.int64)
        collision = out == positives[:, None]
        while np.any(collision):
            out[collision] = rng.integers(0, n, size=int(collision.sum()), dtype=np.int64)
            collision = out == positives[:, None]
        return out

    return NegativeBatch(left_entities=_draw(n_entities_kg1, train_pairs[:, 0]),
                         right_entities=_draw(n_entities_kg2, train_pairs[:, 1]))


def margin_loss(pos_pairs: np.ndarray, negatives: NegativeBatch,
                emb_kg1: np.ndarray, emb_kg2: np.ndarray, margin: float,
                chunk: int = 1024) -> tuple[float, np.ndarray, np.ndarray]:
    """Hinge ranking loss over L1 distances and its exact subgradient.

    loss = sum over positives and their 2k corruptions of
    [f(pos) + margin - f(neg)]_+ with f the L1 distance.  The gradient uses
    sign(0) = 0 and flows only through strictly positive hinge terms.
    Chunking bounds memory; the summation order is fixed for reproducibility.
    """
    if not (np.isfinite(emb_kg1).all() and np.isfinite(emb_kg2).all()):
        raise FloatingPointError("non-finite embedding input to margin loss")
    d = emb_kg1.shape[1]
    g1 = np.zeros_like(emb_kg1)
    g2 = np.zeros_like(emb_kg2)
    total = 0.0
    for start in range(0, len(pos_pairs), chunk):
        e = pos_pairs[start:start + chunk, 0]
        v = pos_pairs[start:start + chunk, 1]
        lc = negatives.left_entities[start:start + chunk]
        rc = negatives.right_entities[start:start + chunk]

        diff_pos = emb_kg1[e] - emb_kg2[v]
        d_pos = np.abs(diff_pos).sum(axis=1)
        diff_left = emb_kg1[lc] - emb_kg2[v][:, None, :]
        diff_right = emb_kg1[e][:, None, :] - emb_kg2[rc]
        hinge_left = d_pos[:, None] + margin - np.abs(diff_left).sum(axis=2)
        hinge_right = d_pos[:, None] + margin - np.abs(diff_right).sum(axis=2)
        active_left = hinge_left > 0.0
        active_right = hinge_right > 0.0
        total += hinge_left[active_left].sum() + hinge_right[active_right].sum()

        sign_pos = np.sign(diff_pos)
        n_active = (active_left.sum(axis=1) + active_right.sum(axis=1)).astype(np.float64)
        np.add.at(g1, e, n_active[:, None] * sign_pos)
        np.add.at(g2, v, -n_active[:, None] * sign_pos)

        sign_left = np.sign(diff_left)
        sign_left *= active_left[:, :, None]
        np.add.at(g1, lc.ravel(), -sign_left.reshape(-1, d))
        np.add.at(g2, v, sign_left.sum(axis=1))

        sign_right = np.sign(diff_right)
        sign_right *= active_right[:, :, None]
        np.add.at(g1, e, -sign_right.sum(axis=1))
        np.add.at(g2, rc.ravel(), sign_right.reshape(-1, d))
    if not np.isfinite(total):
        raise FloatingPointError("non-finite margin loss (embeddings diverged)")
    return float(total), g1, g2


@dataclass
class TrainReport:
    channel: str
    losses: np.ndarray = field(repr=False)
    wall_time: float = 0.0
    checkpoint_dir: Path | None = None

    def smoothed_loss(self, epoch: int, window: int = 50) -> float:
        """Mean loss over the `window` epochs ending at `epoch` (1-based)."""
        if not 1 <= epoch <= len(self.losses):
            raise ValueError("epoch out of range")
        lo = max(0, epoch - window)
        return float(self.losses[lo:epoch].mean())


def train_channel(channel: GcnChannel, adj_kg1: NormalizedAdjacency,
                  adj_kg2: NormalizedAdjacency, train_pairs: np.ndarray,
                  config: TrainingConfig, *, checkpoint_dir=None) -> TrainReport:
    """Full-batch SGD on one channel.

    Every epoch: forward both graphs, hinge loss over the train pairs and the
    current negative batch, exact backward, gradient step on W1/W2 (and the
    trainable inputs).  Negatives are redrawn every `resample_every` epochs
    from a channel-specific stream.  The step divides the summed-loss gradient
    by the number of hinge terms (2k per positive) so one learning-rate
    default behaves the same at any training-set size.
    """
    if len(train_pairs) == 0:
        raise TrainingError("no train pairs to fit")
    rng = np.random.default_rng(negative_stream_seed(config.rng_seed, channel.kind))
    margin = config.margin_for(channel.kind)
    k = config.negatives_per_side
    n1, n2 = channel.n_entities(0), channel.n_entities(1)
    step = config.learning_rate / (2.0 * k * len(train_pairs))
    losses = np.empty(config.epochs)
    negatives = None
    started = time.perf_counter()
    for epoch in range(1, config.epochs + 1):
        if (epoch - 1) % config.resample_every == 0:
            negatives = sample_negatives(train_pairs, n1, n2, k, rng)
        try:
            emb1, emb2 = channel.forward(adj_kg1, adj_kg2)
            loss, grad1, grad2 = margin_loss(train_pairs, negatives, emb1, emb2, margin)
        except FloatingPointError as exc:
            raise TrainingError(
                f"{channel.kind} channel diverged at epoch {epoch}: {exc} "
                f"(|W1|={np.abs(channel.W1).max():.3e}, "
                f"|W2|={np.abs(channel.W2).max():.3e})") from exc
        grads = channel.backward(grad1, grad2)
        channel.apply_update(grads, step)
        losses[epoch - 1] = loss
        if (checkpoint_dir is not None and config.checkpoint_every
                and epoch % config.checkpoint_every == 0 and epoch != config.epochs):
            save_channel(channel, Path(checkpoint_dir) / f"epoch_{epoch:06d}", epoch)
    wall = time.perf_counter() - started
    if checkpoint_dir is not None:
        save_channel(channel, checkpoint_dir, config.epochs)
        checkpoint_dir = Path(checkpoint_dir)
    return TrainReport(channel=channel.kind, losses=losses, wall_time=wall,
                       checkpoint_dir=checkpoint_dir)
