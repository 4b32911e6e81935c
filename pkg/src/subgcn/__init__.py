"""Cross-lingual knowledge-graph entity alignment with structure, attribute,
and line-graph ("subgraph") GCN embedding channels."""

__version__ = "0.1.0"

from .alignment import (AlignmentConfig, AlignmentResult, combined_distance,
                        evaluate, rank_candidates)
from .config import ConfigError, RunConfig, config_from_mapping, load_config
from .encoder import (EmbeddingSet, GcnChannel, GcnChannelConfig, init_channel,
                      load_channel, save_channel)
from .kg import (DatasetError, KnowledgeGraph, SeedAlignment, SyntheticSpec,
                 generate_synthetic_pair, load_dbp15k, serialize_dataset,
                 split_seeds)
from .matrices import (NormalizedAdjacency, RelationStats, SparseMatrix,
                       build_adjacency, normalize, relation_stats, spmm)
from .sgn import (Skeleton, SubgraphNetwork, build_skeleton, build_sgn1,
                  subgraph_features)
from .training import (NegativeBatch, TrainingConfig, TrainReport, margin_loss,
                       sample_negatives, train_channel)

__all__ = [
    "AlignmentConfig", "AlignmentResult", "ConfigError", "DatasetError",
    "EmbeddingSet", "GcnChannel", "GcnChannelConfig", "KnowledgeGraph",
    "NegativeBatch", "NormalizedAdjacency", "RelationStats", "RunConfig",
    "SeedAlignment", "Skeleton", "SparseMatrix", "SubgraphNetwork",
    "SyntheticSpec", "TrainReport", "TrainingConfig", "build_adjacency",
    "build_skeleton", "build_sgn1", "combined_distance", "config_from_mapping",
    "evaluate", "generate_synthetic_pair", "init_channel", "load_channel",
    "load_config", "load_dbp15k", "margin_loss", "normalize", "rank_candidates",
    "relation_stats", "sample_negatives", "save_channel", "serialize_dataset",
    "spmm", "split_seeds", "subgraph_features", "train_channel",
]
