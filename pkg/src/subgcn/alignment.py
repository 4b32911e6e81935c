"""Weighted cross-channel distances, candidate ranking, and bidirectional Hits@k."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .encoder import EmbeddingSet

DIRECTIONS = ("kg1_to_kg2", "kg2_to_kg1")


@dataclass(frozen=True)
class AlignmentConfig:
    """Channel weights (must sum to 1) and the Hits@k report levels.

    Each channel's L1 distance is divided by its dimension before weighting,
    so channels of different width contribute on a comparable scale.
    """

    alpha: float = 0.72
    beta: float = 0.2
    gamma_weight: float = 0.08
    hits_levels: tuple[int, ...] = (1, 10, 50)

    def __post_init__(self):
        weights = (self.alpha, self.beta, self.gamma_weight)
        if min(weights) < 0:
            raise ValueError("channel weights must be nonnegative")
        if abs(sum(weights) - 1.0) > 1e-9:
            raise ValueError("alpha + beta + gamma_weight must equal 1")
        levels = tuple(sorted(set(int(k) for k in self.hits_levels)))
        if not levels or levels[0] < 1:
            raise ValueError("hits levels must be positive")
        object.__setattr__(self, "hits_levels", levels)

    def channel_weights(self) -> dict[str, float]:
        return {"structure": self.alpha, "attribute": self.beta,
                "subgraph": self.gamma_weight}


def _active_channels(embeddings: EmbeddingSet, cfg: AlignmentConfig) -> list[tuple[str, float]]:
    active = []
    for kind, weight in cfg.channel_weights().items():
        if weight == 0.0:
            continue
        if kind not in embeddings.kg1 or kind not in embeddings.kg2:
            raise ValueError(f"missing {kind} embeddings but its weight is {weight}")
        active.append((kind, weight))
    if not active:
        raise ValueError("all channel weights are zero")
    return active


def combined_distance(entity_kg1: int, entity_kg2: int,
                      embeddings: EmbeddingSet, cfg: AlignmentConfig) -> float:
    """Weighted sum of per-channel L1 distances, each divided by its dimension."""
    total = 0.0
    for kind, weight in _active_channels(embeddings, cfg):
        x = embeddings.kg1[kind][entity_kg1]
        y = embeddings.kg2[kind][entity_kg2]
        total += weight * float(np.abs(x - y).sum()) / x.shape[0]
    return total


def _distance_block(source_rows: np.ndarray | slice, embeddings: EmbeddingSet,
                    cfg: AlignmentConfig, direction: str) -> np.ndarray:
    """Distances from selected source entities to every target entity."""
    src_side, tgt_side = ((embeddings.kg1, embeddings.kg2)
                          if direction == "kg1_to_kg2"
                          else (embeddings.kg2, embeddings.kg1))
    block = None
    for kind, weight in _active_channels(embeddings, cfg):
        src = src_side[kind][source_rows]
        tgt = tgt_side[kind]
        part = cdist(src, tgt, metric="cityblock") * (weight / src.shape[1])
        block = part if block is None else block + part
    return block


def rank_candidates(entity: int, direction: str, embeddings: EmbeddingSet,
                    cfg: AlignmentConfig,
                    true_counterpart: int | None = None
                    ) -> tuple[np.ndarray, int | None]:
    """All target entities ordered by ascending distance, ties by ascending id.

    Returns the ordering and, when a true counterpart is given, its 1-based rank.
    """
    if direction not in DIRECTIONS:
        raise ValueError(f"unknown direction {direction!r}")
    side = embeddings.kg1 if direction == "kg1_to_kg2" else embeddings.kg2
    n_source = next(iter(side.values())).shape[0]
    if not 0 <= entity < n_source:
        raise ValueError(f"unknown entity id {entity} for {direction}")
    distances = _distance_block(np.asarray([entity]), embeddings, cfg, direction)[0]
    order = np.lexsort((np.arange(len(distances)), distances))
    rank = None
    if true_counterpart is not None:
        if not 0 <= true_counterpart < len(distances):
            raise ValueError(f"unknown entity id {true_counterpart} for {direction}")
        rank = int(np.nonzero(order == true_counterpart)[0][0]) + 1
    return order, rank


@dataclass(frozen=True)
class DirectionResult:
    direction: str
    test_entities: np.ndarray
    true_ranks: np.ndarray
    hits: dict[int, float]
    mean_rank: float


@dataclass(frozen=True)
class AlignmentResult:
    """Per-direction true-counterpart ranks plus Hits@k percentages and mean rank."""

    kg1_to_kg2: DirectionResult
    kg2_to_kg1: DirectionResult

    def direction(self, name: str) -> DirectionResult:
        if name == "kg1_to_kg2":
            return self.kg1_to_kg2
        if name == "kg2_to_kg1":
            return self.kg2_to_kg1
        raise ValueError(f"unknown direction {name!r}")


def _evaluate_direction(test_pairs: np.ndarray, embeddings: EmbeddingSet,
                        cfg: AlignmentConfig, direction: str,
                        block: int = 256) -> DirectionResult:
    if direction == "kg1_to_kg2":
        sources, truths = test_pairs[:, 0], test_pairs[:, 1]
    else:
        sources, truths = test_pairs[:, 1], test_pairs[:, 0]
    ranks = np.empty(len(sources), dtype=np.int64)
    for start in range(0, len(sources), block):
        rows = sources[start:start + block]
        true_ids = truths[start:start + block]
        dist = _distance_block(rows, embeddings, cfg, direction)
        true_dist = dist[np.arange(len(rows)), true_ids]
        closer = (dist < true_dist[:, None]).sum(axis=1)
        tied_lower = ((dist == true_dist[:, None])
                      & (np.arange(dist.shape[1])[None, :] < true_ids[:, None])).sum(axis=1)
        ranks[start:start + len(rows)] = 1 + closer + tied_lower
    hits = {level: 100.0 * float((ranks <= level).sum()) / len(ranks)
            for level in cfg.hits_levels}
    return DirectionResult(direction=direction,
                           test_entities=sources,
                           true_ranks=ranks,
                           hits=hits,
                           mean_rank=float(ranks.mean()))


def evaluate(test_pairs: np.ndarray, embeddings: EmbeddingSet,
             cfg: AlignmentConfig) -> AlignmentResult:
    """Rank every test entity's true counterpart against the full opposite
    entity set, in both directions."""
    test_pairs = np.asarray(test_pairs, dtype=np.int64).reshape(-1, 2)
    if len(test_pairs) == 0:
        raise ValueError("empty test set")
    return AlignmentResult(
        kg1_to_kg2=_evaluate_direction(test_pairs, embeddings, cfg, "kg1_to_kg2"),
        kg2_to_kg1=_evaluate_direction(test_pairs, embeddings, cfg, "kg2_to_kg1"),
    )


def write_metrics_csv(result: AlignmentResult, path) -> None:
    """Rows `direction,metric,value`; hits as percentages with two decimals."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write("direction,metric,value\n")
        for name in DIRECTIONS:
            res = result.direction(name)
            for level in sorted(res.hits):
                fh.write(f"{name},hits@{level},{res.hits[level]:.2f}\n")
            fh.write(f"{name},mean_rank,{res.mean_rank:.2f}\n")


def write_rank_dump(result: AlignmentResult, path) -> None:
    """Per-test-entity `entity,true_rank` rows for error analysis."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write("direction,entity,true_rank\n")
        for name in DIRECTIONS:
            res = result.direction(name)
            for entity, rank in zip(res.test_entities, res.true_ranks):
                fh.write(f"{name},{entity},{rank}\n")
