"""End-to-end orchestration: feature building, training runs, evaluation, sweeps."""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .alignment import (AlignmentResult, DIRECTIONS, evaluate, write_metrics_csv,
                        write_rank_dump)
from .config import MODE_CHANNELS, RunConfig, config_from_mapping
from .encoder import (CheckpointError, EmbeddingSet, GcnChannel, GcnChannelConfig,
                      init_channel, load_channel)
from .kg import (AttributeVocabulary, KnowledgeGraph, SeedAlignment,
                 attribute_features, load_dbp15k, shared_attribute_vocabulary,
                 split_seeds)
from .matrices import NormalizedAdjacency, SparseMatrix, build_adjacency, normalize, relation_stats
from .sgn import build_skeleton, line_feature_matrix
from .training import TrainReport, channel_init_seed, train_channel

THREADS_ENV = "SUBGCN_THREADS"

# Published dataset shapes: (entities, relations, attributes, relation triples,
# attribute triples) per language side, plus 15000 reference links each.
KNOWN_DATASETS = {
    "zh_en": (("zh", (66469, 2830, 8113, 153929, 379684)),
              ("en", (98125, 2317, 7173, 237674, 567755))),
    "ja_en": (("ja", (65744, 2043, 5882, 164373, 354619)),
              ("en", (95680, 2096, 6066, 233319, 497230))),
    "fr_en": (("fr", (66858, 1379, 4547, 192191, 528665)),
              ("en", (105889, 2209, 6422, 278590, 576543))),
}
KNOWN_REFERENCE_LINKS = 15000


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass
class PreparedPair:
    """Everything the channels need, derived deterministically from one dataset."""

    kg1: KnowledgeGraph
    kg2: KnowledgeGraph
    seeds: SeedAlignment
    adj_kg1: NormalizedAdjacency
    adj_kg2: NormalizedAdjacency
    vocab: AttributeVocabulary
    attr_kg1: SparseMatrix
    attr_kg2: SparseMatrix
    lines_kg1: SparseMatrix
    lines_kg2: SparseMatrix


def prepare_pair(kg1: KnowledgeGraph, kg2: KnowledgeGraph, seeds: SeedAlignment,
                 cfg: RunConfig) -> PreparedPair:
    if seeds.train_mask is None:
        seeds = split_seeds(seeds, cfg.train_fraction, cfg.rng_seed)
    vocab = shared_attribute_vocabulary(kg1, kg2, cfg.attribute_vocab_cap)
    skel1 = build_skeleton(kg1)
    skel2 = build_skeleton(kg2)
    return PreparedPair(
        kg1=kg1,
        kg2=kg2,
        seeds=seeds,
        adj_kg1=normalize(build_adjacency(kg1, relation_stats(kg1), cfg.adjacency_floor)),
        adj_kg2=normalize(build_adjacency(kg2, relation_stats(kg2), cfg.adjacency_floor)),
        vocab=vocab,
        attr_kg1=attribute_features(kg1, vocab.kg1_columns, vocab.size),
        attr_kg2=attribute_features(kg2, vocab.kg2_columns, vocab.size),
        lines_kg1=line_feature_matrix(kg1.n_entities, skel1.edges),
        lines_kg2=line_feature_matrix(kg2.n_entities, skel2.edges),
    )


def _channel_config(prep: PreparedPair, cfg: RunConfig, kind: str) -> GcnChannelConfig:
    if kind == "structure":
        return GcnChannelConfig(kind, cfg.structure_dim, cfg.structure_dim,
                                cfg.structure_dim, cfg.final_activation)
    if kind == "attribute":
        if prep.vocab.size == 0:
            raise ValueError("attribute channel requested but the shared attribute "
                             "vocabulary is empty")
        return GcnChannelConfig(kind, prep.vocab.size, cfg.attribute_dim,
                                cfg.attribute_dim, cfg.final_activation)
    if kind == "subgraph":
        width = max(prep.lines_kg1.cols, prep.lines_kg2.cols)
        if width == 0:
            raise ValueError("subgraph channel requested but both skeletons are empty")
        return GcnChannelConfig(kind, width, cfg.subgraph_dim, cfg.subgraph_dim,
                                cfg.final_activation)
    raise ValueError(f"unknown channel kind {kind!r}")


def _channel_inputs(prep: PreparedPair, kind: str):
    if kind == "structure":
        return prep.kg1.n_entities, prep.kg2.n_entities
    if kind == "attribute":
        return prep.attr_kg1, prep.attr_kg2
    return prep.lines_kg1, prep.lines_kg2


def build_channels(prep: PreparedPair, cfg: RunConfig) -> dict[str, GcnChannel]:
    channels = {}
    for kind in cfg.channels:
        config = _channel_config(prep, cfg, kind)
        in1, in2 = _channel_inputs(prep, kind)
        channels[kind] = init_channel(config, in1, in2,
                                      channel_init_seed(cfg.rng_seed, kind))
    return channels


def write_manifest(cfg: RunConfig, out_dir: Path) -> None:
    config = cfg.to_mapping()
    del config["out_dir"]   # where a run lives is not part of what it computed
    manifest = {"tool": "subgcn", "version": __version__, "config": config}
    with (out_dir / "manifest.json").open("w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(run_dir) -> RunConfig:
    from .config import config_from_mapping
    path = Path(run_dir) / "manifest.json"
    if not path.exists():
        raise CheckpointError(f"missing run manifest: {path}")
    with path.open("r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    return config_from_mapping(manifest["config"])


def write_loss_trace(reports: dict[str, TrainReport], path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("epoch,channel,loss\n")
        for kind in ("structure", "attribute", "subgraph"):
            if kind not in reports:
                continue
            for epoch, loss in enumerate(reports[kind].losses, start=1):
                fh.write(f"{epoch},{kind},{float(loss)!r}\n")


def train_run(kg1: KnowledgeGraph, kg2: KnowledgeGraph, seeds: SeedAlignment,
              cfg: RunConfig, out_dir) -> dict[str, TrainReport]:
    """Train the configured channels; write manifest, checkpoints, and loss CSV.

    The channels are independent, so SUBGCN_THREADS > 1 trains them
    concurrently; results are identical at any thread count.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_manifest(cfg, out_dir)
    prep = prepare_pair(kg1, kg2, seeds, cfg)
    channels = build_channels(prep, cfg)
    train_cfg = cfg.training_config()
    train_pairs = prep.seeds.train_pairs

    def _run(kind: str) -> TrainReport:
        return train_channel(channels[kind], prep.adj_kg1, prep.adj_kg2,
                             train_pairs, train_cfg,
                             checkpoint_dir=out_dir / "checkpoints" / kind)

    kinds = list(cfg.channels)
    workers = min(thread_count(), len(kinds))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = dict(zip(kinds, pool.map(_run, kinds)))
    else:
        reports = {kind: _run(kind) for kind in kinds}
    write_loss_trace(reports, out_dir / "loss_trace.csv")
    return reports


def load_embeddings(prep: PreparedPair, cfg: RunConfig, run_dir,
                    kinds: tuple[str, ...] | None = None) -> EmbeddingSet:
    """Restore checkpoints and run the forward pass to rebuild all embeddings."""
    run_dir = Path(run_dir)
    kinds = kinds or cfg.channels
    expected_out = {"structure": cfg.structure_dim, "attribute": cfg.attribute_dim,
                    "subgraph": cfg.subgraph_dim}
    kg1_emb, kg2_emb = {}, {}
    for kind in kinds:
        directory = run_dir / "checkpoints" / kind
        channel, _ = load_channel(directory)
        if channel.config.output_dim != expected_out[kind]:
            raise CheckpointError(
                f"{kind} checkpoint has output_dim {channel.config.output_dim}, "
                f"configuration expects {expected_out[kind]}")
        emb1, emb2 = channel.forward(prep.adj_kg1, prep.adj_kg2)
        kg1_emb[kind] = emb1
        kg2_emb[kind] = emb2
    return EmbeddingSet(kg1=kg1_emb, kg2=kg2_emb)


def evaluate_run(run_dir, modes: tuple[str, ...] | None = None,
                 rank_dump: bool = False) -> dict[str, AlignmentResult]:
    """Evaluate a finished training run under one or more modes.

    Writes metrics_<mode>.csv per mode and, for several modes, a combined
    comparison.csv (mode,direction,metric,value).  Returns results by mode.
    """
    run_dir = Path(run_dir)
    cfg = read_manifest(run_dir)
    modes = modes or (cfg.mode,)
    kg1, kg2, seeds = load_dbp15k(cfg.dataset_dir)
    prep = prepare_pair(kg1, kg2, seeds, cfg)
    results: dict[str, AlignmentResult] = {}
    needed = tuple(dict.fromkeys(
        kind for mode in modes for kind in MODE_CHANNELS[mode]))
    embeddings = load_embeddings(prep, cfg, run_dir, kinds=needed)
    for mode in modes:
        subset = EmbeddingSet(
            kg1={k: embeddings.kg1[k] for k in MODE_CHANNELS[mode]},
            kg2={k: embeddings.kg2[k] for k in MODE_CHANNELS[mode]},
        )
        result = evaluate(prep.seeds.test_pairs, subset, cfg.alignment_config(mode))
        results[mode] = result
        tag = mode.replace("+", "_")
        write_metrics_csv(result, run_dir / f"metrics_{tag}.csv")
        if rank_dump:
            write_rank_dump(result, run_dir / f"ranks_{tag}.csv")
    if len(modes) > 1:
        with (run_dir / "comparison.csv").open("w", encoding="utf-8") as fh:
            fh.write("mode,direction,metric,value\n")
            for mode in modes:
                for name in DIRECTIONS:
                    res = results[mode].direction(name)
                    for level in sorted(res.hits):
                        fh.write(f"{mode},{name},hits@{level},{res.hits[level]:.2f}\n")
                    fh.write(f"{mode},{name},mean_rank,{res.mean_rank:.2f}\n")
    return results


def comparison_warnings(results: dict[str, AlignmentResult]) -> list[str]:
    """Flag the combined model scoring >2 Hits@10 points below structure+attribute."""
    warnings = []
    if "sub-gcn" in results and "se+ae" in results:
        for name in DIRECTIONS:
            full = results["sub-gcn"].direction(name).hits.get(10)
            partial = results["se+ae"].direction(name).hits.get(10)
            if full is not None and partial is not None and full < partial - 2.0:
                warnings.append(
                    f"sub-gcn hits@10 ({full:.2f}) trails se+ae ({partial:.2f}) "
                    f"by more than 2 points on {name}")
    return warnings


def sweep_run(kg1: KnowledgeGraph, kg2: KnowledgeGraph, seeds: SeedAlignment,
              cfg: RunConfig, fractions: tuple[float, ...], out_dir,
              parallel: bool = False) -> list[str]:
    """Train + evaluate once per seed fraction, each training from scratch.

    Rows are flushed to sweep.csv in fraction order as soon as they are
    available, so a crash loses at most the unfinished cells.  `parallel`
    runs fractions concurrently (memory-bound: each holds its own channels).
    Returns soft-check warnings (Hits@1 expected nondecreasing in fraction).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def _one(fraction: float):
        sub_dir = out_dir / f"fraction_{round(fraction * 100):03d}"
        sub_cfg = cfg.replace(train_fraction=fraction, out_dir=str(sub_dir),
                              hits_levels=(1, 10, 50))
        train_run(kg1, kg2, seeds, sub_cfg, sub_dir)
        return evaluate_run(sub_dir)[sub_cfg.mode]

    hits1 = {name: [] for name in DIRECTIONS}
    csv_path = out_dir / "sweep.csv"
    with csv_path.open("w", encoding="utf-8") as fh:
        fh.write("fraction,direction,hits1,hits10,hits50\n")
        fh.flush()

        def _emit(fraction: float, result) -> None:
            for name in DIRECTIONS:
                res = result.direction(name)
                fh.write(f"{fraction:.2f},{name},{res.hits[1]:.2f},"
                         f"{res.hits[10]:.2f},{res.hits[50]:.2f}\n")
                hits1[name].append(res.hits[1])
            fh.flush()

        if parallel and len(fractions) > 1:
            with ThreadPoolExecutor(max_workers=min(thread_count(),
                                                    len(fractions))) as pool:
                for fraction, result in zip(fractions, pool.map(_one, fractions)):
                    _emit(fraction, result)
        else:
            for fraction in fractions:
                _emit(fraction, _one(fraction))

    warnings = []
    for name in DIRECTIONS:
        values = hits1[name]
        for a, b, fa, fb in zip(values, values[1:], fractions, fractions[1:]):
            if b < a:
                warnings.append(f"hits@1 on {name} fell from {a:.2f} at fraction "
                                f"{fa:.2f} to {b:.2f} at fraction {fb:.2f}")
    return warnings


def ingest_report(kg1: KnowledgeGraph, kg2: KnowledgeGraph, seeds: SeedAlignment,
                  dataset_name: str) -> tuple[list[str], list[str]]:
    """Summary lines plus non-fatal mismatch warnings against known dataset shapes."""
    lines = []
    header = f"{'side':<6}{'entities':>10}{'relations':>11}{'attributes':>12}" \
             f"{'rel_triples':>13}{'attr_triples':>14}"
    lines.append(header)
    for side, kg in (("1", kg1), ("2", kg2)):
        s = kg.summary()
        lines.append(f"{side:<6}{s['entities']:>10}{s['relations']:>11}"
                     f"{s['attributes']:>12}{s['relation_triples']:>13}"
                     f"{s['attribute_triples']:>14}")
    lines.append(f"reference links: {len(seeds)}")

    warnings = []
    key = dataset_name.lower().replace("-", "_")
    known = next((KNOWN_DATASETS[k] for k in KNOWN_DATASETS if k in key), None)
    if known is not None:
        for (tag, expected), kg in zip(known, (kg1, kg2)):
            s = kg.summary()
            actual = (s["entities"], s["relations"], s["attributes"],
                      s["relation_triples"], s["attribute_triples"])
            for field_name, exp, act in zip(
                    ("entities", "relations", "attributes",
                     "relation_triples", "attribute_triples"), expected, actual):
                if exp != act:
                    warnings.append(f"{tag} side {field_name}: expected {exp}, "
                                    f"found {act}")
        if len(seeds) != KNOWN_REFERENCE_LINKS:
            warnings.append(f"reference links: expected {KNOWN_REFERENCE_LINKS}, "
                            f"found {len(seeds)}")
    return lines, warnings
