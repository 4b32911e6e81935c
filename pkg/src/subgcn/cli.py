"""Command-line surface: ingest, synth, build-sgn, train, eval, sweep."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import MODES, ConfigError, RunConfig, load_config
from .encoder import CheckpointError
from .kg import (DatasetError, SyntheticSpec, generate_synthetic_pair,
                 load_dbp15k, serialize_dataset)
from .pipeline import (comparison_warnings, evaluate_run, ingest_report,
                       sweep_run, train_run)
from .sgn import build_skeleton, build_sgn1, subgraph_features, write_sgn_edge_list
from .matrices import write_sparse_text
from .training import TrainingError

log = logging.getLogger("subgcn")

_ERROR_CATEGORIES = (
    (ConfigError, "config"),
    (DatasetError, "dataset"),
    (CheckpointError, "checkpoint"),
    (TrainingError, "training"),
    ((ValueError, TypeError, OSError), "input"),
)


def _shared_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="run configuration file (key = value lines)")
    parser.add_argument("--seed", type=int, help="override the configured rng_seed")
    parser.add_argument("--out", help="override the configured output directory")
    parser.add_argument("--mode", choices=MODES, help="channel selection")


def _resolve_config(args, dataset_dir: str | None = None) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    updates = {}
    if dataset_dir is not None:
        updates["dataset_dir"] = dataset_dir
    if getattr(args, "dataset", None):
        updates["dataset_dir"] = args.dataset
    if args.seed is not None:
        updates["rng_seed"] = args.seed
    if args.out is not None:
        updates["out_dir"] = args.out
    if args.mode is not None:
        updates["mode"] = args.mode
    if updates:
        cfg = cfg.replace(**updates)
    return cfg


def _cmd_ingest(args) -> int:
    kg1, kg2, seeds = load_dbp15k(args.dataset_dir)
    name = Path(args.dataset_dir).name
    lines, warnings = ingest_report(kg1, kg2, seeds, name)
    for line in lines:
        print(line)
    for warning in warnings:
        print(f"warning: count mismatch against published figures: {warning}")
    out_dir = Path(args.out or (Path(args.dataset_dir).name + "_normalized"))
    serialize_dataset(kg1, kg2, seeds, out_dir)
    with (out_dir / "ingest_report.txt").open("w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(line + "\n")
        for warning in warnings:
            fh.write(f"warning: {warning}\n")
    print(f"normalized dataset written to {out_dir}")
    return 0


def _cmd_synth(args) -> int:
    spec = SyntheticSpec(
        n_entities=args.entities,
        n_relations=args.relations,
        n_rel_triples=args.rel_triples,
        n_attributes=args.attributes,
        attr_per_entity=args.attr_per_entity,
        perturbation_rate=args.perturbation,
        rng_seed=args.seed if args.seed is not None else 0,
    )
    kg1, kg2, seeds = generate_synthetic_pair(spec)
    out_dir = Path(args.out or "synthetic_dataset")
    serialize_dataset(kg1, kg2, seeds, out_dir)
    print(f"synthetic pair written to {out_dir}: "
          f"{kg1.n_entities} entities, {len(kg1.relation_triples)} relation triples, "
          f"{len(seeds)} ground-truth links")
    return 0


def _cmd_build_sgn(args) -> int:
    kg1, kg2, _ = load_dbp15k(args.dataset_dir)
    out_dir = Path(args.out or "sgn_out")
    out_dir.mkdir(parents=True, exist_ok=True)
    for side, kg in (("1", kg1), ("2", kg2)):
        skeleton = build_skeleton(kg)
        sgn = build_sgn1(skeleton, order=args.order)
        write_sgn_edge_list(sgn, out_dir / f"sgn_edges_{side}")
        write_sparse_text(subgraph_features(kg, sgn), out_dir / f"sgn_features_{side}")
        print(f"side {side}: {skeleton.n_edges} lines, {sgn.n_links} links")
    print(f"subgraph networks written to {out_dir}")
    return 0


def _cmd_train(args) -> int:
    cfg = _resolve_config(args)
    if not cfg.dataset_dir:
        raise ConfigError("dataset_dir must be set (config key or --dataset)")
    kg1, kg2, seeds = load_dbp15k(cfg.dataset_dir)
    reports = train_run(kg1, kg2, seeds, cfg, cfg.out_dir)
    for kind, report in reports.items():
        print(f"{kind}: final loss {report.losses[-1]:.4f} "
              f"({report.wall_time:.1f}s, checkpoint {report.checkpoint_dir})")
    print(f"run artifacts written to {cfg.out_dir}")
    return 0


def _cmd_eval(args) -> int:
    if args.modes:
        modes = tuple(args.modes.split(","))
    elif args.mode:
        modes = (args.mode,)
    else:
        modes = None
    if modes:
        for mode in modes:
            if mode not in MODES:
                raise ConfigError(f"unknown mode {mode!r}")
    results = evaluate_run(args.run, modes=modes, rank_dump=args.ranks)
    for mode, result in results.items():
        for name in ("kg1_to_kg2", "kg2_to_kg1"):
            res = result.direction(name)
            hits = "  ".join(f"hits@{level}={res.hits[level]:.2f}"
                             for level in sorted(res.hits))
            print(f"{mode:8s} {name}: {hits}  mean_rank={res.mean_rank:.2f}")
    for warning in comparison_warnings(results):
        print(f"warning: {warning}")
    print(f"metrics written to {args.run}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _resolve_config(args)
    if not cfg.dataset_dir:
        raise ConfigError("dataset_dir must be set (config key or --dataset)")
    fractions = tuple(float(part) for part in args.fractions.split(","))
    kg1, kg2, seeds = load_dbp15k(cfg.dataset_dir)
    out_dir = Path(cfg.out_dir)
    warnings = sweep_run(kg1, kg2, seeds, cfg, fractions, out_dir,
                         parallel=args.parallel)
    for warning in warnings:
        print(f"warning: {warning}")
    print(f"sweep results written to {out_dir / 'sweep.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="subgcn",
        description="Cross-lingual KG entity alignment with structure, attribute, "
                    "and line-graph GCN channels.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load, validate, and normalize a dataset")
    p.add_argument("dataset_dir")
    _shared_flags(p)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("synth", help="generate a synthetic bilingual pair")
    p.add_argument("--entities", type=int, default=200)
    p.add_argument("--relations", type=int, default=20)
    p.add_argument("--rel-triples", dest="rel_triples", type=int, default=800)
    p.add_argument("--attributes", type=int, default=50)
    p.add_argument("--attr-per-entity", dest="attr_per_entity", type=float, default=3.0)
    p.add_argument("--perturbation", type=float, default=0.0)
    _shared_flags(p)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("build-sgn", help="export line graphs and incidence features")
    p.add_argument("dataset_dir")
    p.add_argument("--order", type=int, default=1,
                   help="subgraph order (only 1 is supported)")
    _shared_flags(p)
    p.set_defaults(func=_cmd_build_sgn)

    p = sub.add_parser("train", help="train the configured channels")
    p.add_argument("--dataset", help="dataset directory (overrides config)")
    _shared_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a finished run")
    p.add_argument("--run", required=True, help="training run directory")
    p.add_argument("--modes", help="comma-separated eval modes (default: trained mode)")
    p.add_argument("--ranks", action="store_true", help="dump per-entity true ranks")
    _shared_flags(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("sweep", help="train + evaluate across seed fractions")
    p.add_argument("--dataset", help="dataset directory (overrides config)")
    p.add_argument("--fractions", default="0.1,0.2,0.3,0.4,0.5,0.6")
    p.add_argument("--parallel", action="store_true",
                   help="run fractions concurrently (memory-bound)")
    _shared_flags(p)
    p.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - single reporting point for the CLI
        for types, category in _ERROR_CATEGORIES:
            if isinstance(exc, types):
                print(f"error:{category}: {exc}", file=sys.stderr)
                return 1
        print(f"error:internal: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
