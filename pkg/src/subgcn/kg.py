"""Bilingual knowledge-graph data model, tab-separated dataset IO, and synthetic pairs."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .matrices import SparseMatrix


class DatasetError(Exception):
    """Malformed or inconsistent dataset on disk."""


@dataclass(frozen=True)
class KnowledgeGraph:
    """One language side: entities, relations, attributes, and their triples.

    Ids are dense (0..n-1) per graph so they can index matrix rows directly;
    original URIs live in the label tuples.  Attribute values are stored
    verbatim but never feed any feature.
    """

    relation_triples: np.ndarray      # (m, 3) int64 rows: head, relation, tail
    attribute_pairs: np.ndarray       # (a, 2) int64 rows: entity, attribute
    attribute_values: tuple[str, ...]
    entity_labels: tuple[str, ...]
    relation_labels: tuple[str, ...]
    attribute_labels: tuple[str, ...]

    def __post_init__(self):
        triples = np.asarray(self.relation_triples, dtype=np.int64).reshape(-1, 3)
        pairs = np.asarray(self.attribute_pairs, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, "relation_triples", triples)
        object.__setattr__(self, "attribute_pairs", pairs)
        if len(pairs) != len(self.attribute_values):
            raise ValueError("attribute pair/value count mismatch")
        if len(triples):
            if triples[:, [0, 2]].min() < 0 or triples[:, [0, 2]].max() >= self.n_entities:
                raise ValueError("relation triple references an invalid entity id")
            if triples[:, 1].min() < 0 or triples[:, 1].max() >= self.n_relations:
                raise ValueError("relation triple references an invalid relation id")
        if len(pairs):
            if pairs[:, 0].min() < 0 or pairs[:, 0].max() >= self.n_entities:
                raise ValueError("attribute triple references an invalid entity id")
            if pairs[:, 1].min() < 0 or pairs[:, 1].max() >= self.n_attributes:
                raise ValueError("attribute triple references an invalid attribute id")
        triples.setflags(write=False)
        pairs.setflags(write=False)

    @property
    def n_entities(self) -> int:
        return len(self.entity_labels)

    @property
    def n_relations(self) -> int:
        return len(self.relation_labels)

    @property
    def n_attributes(self) -> int:
        return len(self.attribute_labels)

    @property
    def attribute_triples(self) -> list[tuple[int, int, str]]:
        return [(int(e), int(a), v)
                for (e, a), v in zip(self.attribute_pairs, self.attribute_values)]

    def summary(self) -> dict[str, int]:
        return {
            "entities": self.n_entities,
            "relations": self.n_relations,
            "attributes": self.n_attributes,
            "relation_triples": len(self.relation_triples),
            "attribute_triples": len(self.attribute_pairs),
        }


@dataclass(frozen=True)
class SeedAlignment:
    """Known equivalent-entity pairs (left id in KG1, right id in KG2).

    ``train_mask`` is None until the pairs have been split; afterwards it
    tags each pair as train (True) or test (False).
    """

    pairs: np.ndarray
    train_mask: np.ndarray | None = None

    def __post_init__(self):
        pairs = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, "pairs", pairs)
        if len(np.unique(pairs[:, 0])) != len(pairs):
            raise ValueError("an entity appears twice on the left side")
        if len(np.unique(pairs[:, 1])) != len(pairs):
            raise ValueError("an entity appears twice on the right side")
        pairs.setflags(write=False)
        if self.train_mask is not None:
            mask = np.asarray(self.train_mask, dtype=bool)
            if mask.shape != (len(pairs),):
                raise ValueError("train mask length mismatch")
            object.__setattr__(self, "train_mask", mask)
            mask.setflags(write=False)

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def train_pairs(self) -> np.ndarray:
        if self.train_mask is None:
            raise ValueError("seed alignment has not been split")
        return self.pairs[self.train_mask]

    @property
    def test_pairs(self) -> np.ndarray:
        if self.train_mask is None:
            raise ValueError("seed alignment has not been split")
        return self.pairs[~self.train_mask]


def split_seeds(seeds: SeedAlignment, train_fraction: float, rng_seed: int) -> SeedAlignment:
    """Tag floor(train_fraction * m) uniformly sampled pairs as train, rest as test."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    m = len(seeds)
    n_train = math.floor(train_fraction * m)
    if n_train == 0 or n_train == m:
        raise ValueError(
            f"degenerate split: {n_train} train / {m - n_train} test pairs from m={m}")
    order = np.random.default_rng(rng_seed).permutation(m)
    mask = np.zeros(m, dtype=bool)
    mask[order[:n_train]] = True
    return SeedAlignment(pairs=seeds.pairs, train_mask=mask)


# ---------------------------------------------------------------------------
# Dataset layout (tab-separated, UTF-8):
#   ent_ids_1 / ent_ids_2      original_id <TAB> label
#   rel_ids_1 / rel_ids_2      original_id <TAB> label
#   attr_ids_1 / attr_ids_2    original_id <TAB> label   (optional)
#   triples_1 / triples_2      head <TAB> relation <TAB> tail
#   attr_triples_1/_2          entity <TAB> attribute <TAB> value
#   ref_ent_ids                left_entity <TAB> right_entity
# When attr_ids_N is absent the attribute column of attr_triples_N is an
# opaque string predicate, indexed by first appearance.
# ---------------------------------------------------------------------------

_REQUIRED_FILES = ("ent_ids_1", "ent_ids_2", "rel_ids_1", "rel_ids_2",
                   "triples_1", "triples_2", "attr_triples_1", "attr_triples_2",
                   "ref_ent_ids")


def _parse_int(token: str, path: Path, lineno: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise DatasetError(f"{path}:{lineno}: non-integer id {token!r}") from None


def _read_id_file(path: Path) -> tuple[dict[int, int], list[str]]:
    mapping: dict[int, int] = {}
    labels: list[str] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DatasetError(f"{path}:{lineno}: expected 2 tab-separated columns, "
                                   f"got {len(parts)}")
            orig = _parse_int(parts[0], path, lineno)
            if orig in mapping:
                raise DatasetError(f"{path}:{lineno}: duplicate id {orig}")
            mapping[orig] = len(labels)
            labels.append(parts[1])
    return mapping, labels


def _lookup(mapping: dict[int, int], orig: int, path: Path, lineno: int, what: str) -> int:
    try:
        return mapping[orig]
    except KeyError:
        raise DatasetError(f"{path}:{lineno}: undeclared {what} id {orig}") from None


def _read_triples(path: Path, ent_map: dict[int, int],
                  rel_map: dict[int, int]) -> np.ndarray:
    rows: list[tuple[int, int, int]] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DatasetError(f"{path}:{lineno}: expected 3 tab-separated columns, "
                                   f"got {len(parts)}")
            h = _lookup(ent_map, _parse_int(parts[0], path, lineno), path, lineno, "entity")
            r = _lookup(rel_map, _parse_int(parts[1], path, lineno), path, lineno, "relation")
            t = _lookup(ent_map, _parse_int(parts[2], path, lineno), path, lineno, "entity")
            rows.append((h, r, t))
    return np.asarray(rows, dtype=np.int64).reshape(-1, 3)


def _read_attr_triples(path: Path, ent_map: dict[int, int],
                       attr_map: dict[int, int] | None,
                       attr_labels: list[str]) -> tuple[np.ndarray, tuple[str, ...]]:
    auto: dict[str, int] = {}
    pairs: list[tuple[int, int]] = []
    values: list[str] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split("\t", 2)
            if len(parts) != 3:
                raise DatasetError(f"{path}:{lineno}: expected 3 tab-separated columns, "
                                   f"got {len(parts)}")
            e = _lookup(ent_map, _parse_int(parts[0], path, lineno), path, lineno, "entity")
            if attr_map is not None:
                a = _lookup(attr_map, _parse_int(parts[1], path, lineno),
                            path, lineno, "attribute")
            else:
                key = parts[1]
                if key not in auto:
                    auto[key] = len(attr_labels)
                    attr_labels.append(key)
                a = auto[key]
            pairs.append((e, a))
            values.append(parts[2])
    return np.asarray(pairs, dtype=np.int64).reshape(-1, 2), tuple(values)


def load_dbp15k(directory) -> tuple[KnowledgeGraph, KnowledgeGraph, SeedAlignment]:
    """Load a bilingual dataset in the documented tab-separated layout.

    Ids are reindexed densely per graph in file order; the reference links
    come back as an unsplit SeedAlignment.
    """
    directory = Path(directory)
    for name in _REQUIRED_FILES:
        if not (directory / name).exists():
            raise DatasetError(f"missing dataset file: {directory / name}")

    graphs = []
    ent_maps = []
    for side in ("1", "2"):
        ent_map, ent_labels = _read_id_file(directory / f"ent_ids_{side}")
        rel_map, rel_labels = _read_id_file(directory / f"rel_ids_{side}")
        attr_ids_path = directory / f"attr_ids_{side}"
        if attr_ids_path.exists():
            attr_map, attr_labels = _read_id_file(attr_ids_path)
        else:
            attr_map, attr_labels = None, []
        triples = _read_triples(directory / f"triples_{side}", ent_map, rel_map)
        pairs, values = _read_attr_triples(directory / f"attr_triples_{side}",
                                           ent_map, attr_map, attr_labels)
        graphs.append(KnowledgeGraph(
            relation_triples=triples,
            attribute_pairs=pairs,
            attribute_values=values,
            entity_labels=tuple(ent_labels),
            relation_labels=tuple(rel_labels),
            attribute_labels=tuple(attr_labels),
        ))
        ent_maps.append(ent_map)

    refs: list[tuple[int, int]] = []
    path = directory / "ref_ent_ids"
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DatasetError(f"{path}:{lineno}: expected 2 tab-separated columns, "
                                   f"got {len(parts)}")
            left = _lookup(ent_maps[0], _parse_int(parts[0], path, lineno),
                           path, lineno, "entity")
            right = _lookup(ent_maps[1], _parse_int(parts[1], path, lineno),
                            path, lineno, "entity")
            refs.append((left, right))
    seeds = SeedAlignment(pairs=np.asarray(refs, dtype=np.int64).reshape(-1, 2))
    return graphs[0], graphs[1], seeds


def serialize_dataset(kg1: KnowledgeGraph, kg2: KnowledgeGraph,
                      seeds: SeedAlignment, directory) -> None:
    """Write the pair in the same layout load_dbp15k reads (dense ids as originals)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    def _write_ids(name: str, labels: tuple[str, ...]) -> None:
        with (directory / name).open("w", encoding="utf-8") as fh:
            for i, label in enumerate(labels):
                fh.write(f"{i}\t{label}\n")

    for side, kg in (("1", kg1), ("2", kg2)):
        _write_ids(f"ent_ids_{side}", kg.entity_labels)
        _write_ids(f"rel_ids_{side}", kg.relation_labels)
        _write_ids(f"attr_ids_{side}", kg.attribute_labels)
        with (directory / f"triples_{side}").open("w", encoding="utf-8") as fh:
            for h, r, t in kg.relation_triples:
                fh.write(f"{h}\t{r}\t{t}\n")
        with (directory / f"attr_triples_{side}").open("w", encoding="utf-8") as fh:
            for (e, a), v in zip(kg.attribute_pairs, kg.attribute_values):
                fh.write(f"{e}\t{a}\t{v}\n")
    with (directory / "ref_ent_ids").open("w", encoding="utf-8") as fh:
        for left, right in seeds.pairs:
            fh.write(f"{left}\t{right}\n")


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters for a desk-scale bilingual pair with known ground truth."""

    n_entities: int
    n_relations: int
    n_rel_triples: int
    n_attributes: int
    attr_per_entity: float = 3.0
    perturbation_rate: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("n_entities", "n_relations", "n_rel_triples", "n_attributes"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.perturbation_rate <= 1.0:
            raise ValueError("perturbation_rate must lie in [0, 1]")
        if self.attr_per_entity < 0:
            raise ValueError("attr_per_entity must be nonnegative")


def generate_synthetic_pair(spec: SyntheticSpec
                            ) -> tuple[KnowledgeGraph, KnowledgeGraph, SeedAlignment]:
    """Random KG1, an entity-permuted copy as KG2 (optionally perturbed), full seed map.

    KG2 equals KG1 under a random permutation; perturbation_rate rewires that
    share of KG2's relation triples and resamples the same share of attribute
    assignments.  Fully deterministic given spec.rng_seed.
    """
    n = spec.n_entities
    if spec.n_rel_triples > n * (n - 1):
        raise ValueError("n_rel_triples exceeds the number of distinct ordered "
                         "entity pairs without self-loops")
    rng = np.random.default_rng(spec.rng_seed)

    seen: set[tuple[int, int]] = set()
    triples1 = np.empty((spec.n_rel_triples, 3), dtype=np.int64)
    placed = 0
    while placed < spec.n_rel_triples:
        h = int(rng.integers(n))
        t = int(rng.integers(n))
        if h == t or (h, t) in seen:
            continue
        seen.add((h, t))
        triples1[placed] = (h, int(rng.integers(spec.n_relations)), t)
        placed += 1

    n_attr_triples = int(round(n * spec.attr_per_entity))
    attr_pairs1 = np.column_stack([
        rng.integers(0, n, size=n_attr_triples),
        rng.integers(0, spec.n_attributes, size=n_attr_triples),
    ]).astype(np.int64)
    values1 = tuple(f"v{int(x)}" for x in rng.integers(0, 10 ** 6, size=n_attr_triples))

    perm = rng.permutation(n).astype(np.int64)

    triples2 = triples1.copy()
    triples2[:, 0] = perm[triples1[:, 0]]
    triples2[:, 2] = perm[triples1[:, 2]]
    n_rewire = int(round(spec.perturbation_rate * spec.n_rel_triples))
    if n_rewire:
        if n < 3:
            raise ValueError("cannot rewire triples with fewer than 3 entities")
        chosen = rng.choice(spec.n_rel_triples, size=n_rewire, replace=False)
        for idx in chosen:
            col = 0 if rng.integers(2) else 2
            other = triples2[idx, 2 - col]
            original = triples2[idx, col]
            while True:
                e = int(rng.integers(n))
                if e != other and e != original:
                    triples2[idx, col] = e
                    break

    attr_pairs2 = attr_pairs1.copy()
    attr_pairs2[:, 0] = perm[attr_pairs1[:, 0]]
    values2 = list(values1)
    n_resample = int(round(spec.perturbation_rate * n_attr_triples))
    if n_resample:
        chosen = rng.choice(n_attr_triples, size=n_resample, replace=False)
        for idx in chosen:
            attr_pairs2[idx, 1] = int(rng.integers(spec.n_attributes))
            values2[idx] = f"v{int(rng.integers(0, 10 ** 6))}"

    rel_labels = tuple(f"r{i}" for i in range(spec.n_relations))
    attr_labels = tuple(f"a{i}" for i in range(spec.n_attributes))
    kg1 = KnowledgeGraph(
        relation_triples=triples1,
        attribute_pairs=attr_pairs1,
        attribute_values=values1,
        entity_labels=tuple(f"kg1_e{i}" for i in range(n)),
        relation_labels=rel_labels,
        attribute_labels=attr_labels,
    )
    kg2 = KnowledgeGraph(
        relation_triples=triples2,
        attribute_pairs=attr_pairs2,
        attribute_values=tuple(values2),
        entity_labels=tuple(f"kg2_e{i}" for i in range(n)),
        relation_labels=rel_labels,
        attribute_labels=attr_labels,
    )
    seeds = SeedAlignment(pairs=np.column_stack([np.arange(n, dtype=np.int64), perm]))
    return kg1, kg2, seeds


@dataclass(frozen=True)
class AttributeVocabulary:
    """Shared attribute space: one column per retained label, most frequent first."""

    labels: tuple[str, ...]
    kg1_columns: np.ndarray   # per KG1 attribute id: shared column or -1 if dropped
    kg2_columns: np.ndarray

    @property
    def size(self) -> int:
        return len(self.labels)


def shared_attribute_vocabulary(kg1: KnowledgeGraph, kg2: KnowledgeGraph,
                                cap: int = 2000) -> AttributeVocabulary:
    """Merge the two attribute vocabularies by exact label match, keep the cap
    most frequent (ties broken by label) so one weight matrix serves both KGs."""
    if cap <= 0:
        raise ValueError("cap must be positive")
    counts: dict[str, int] = {}
    for kg in (kg1, kg2):
        usage = np.bincount(kg.attribute_pairs[:, 1], minlength=kg.n_attributes)
        for label, c in zip(kg.attribute_labels, usage):
            counts[label] = counts.get(label, 0) + int(c)
    kept = sorted(counts, key=lambda label: (-counts[label], label))[:cap]
    column = {label: i for i, label in enumerate(kept)}

    def _columns(kg: KnowledgeGraph) -> np.ndarray:
        return np.asarray([column.get(label, -1) for label in kg.attribute_labels],
                          dtype=np.int64)

    return AttributeVocabulary(labels=tuple(kept),
                               kg1_columns=_columns(kg1),
                               kg2_columns=_columns(kg2))


def attribute_features(kg: KnowledgeGraph, columns: np.ndarray,
                       n_columns: int) -> SparseMatrix:
    """Binary entity-by-shared-attribute matrix; rows of attribute-less entities are zero."""
    pairs = kg.attribute_pairs
    if len(columns) != kg.n_attributes:
        raise ValueError("column mapping does not cover this graph's attributes")
    cols = columns[pairs[:, 1]]
    keep = cols >= 0
    ents = pairs[keep, 0]
    cols = cols[keep]
    if len(ents):
        codes = np.unique(ents * np.int64(n_columns) + cols)
        ents = codes // n_columns
        cols = codes % n_columns
    return SparseMatrix.from_triplets(kg.n_entities, n_columns, ents, cols,
                                      np.ones(len(ents)))
