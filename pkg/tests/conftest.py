import numpy as np
import pytest

from subgcn.kg import KnowledgeGraph


def make_kg(n_entities, triples, n_relations=None, attr_triples=(), n_attributes=0):
    """Small-graph factory: triples as (head, relation, tail) tuples."""
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    if n_relations is None:
        n_relations = int(triples[:, 1].max()) + 1 if len(triples) else 1
    pairs = np.asarray([(e, a) for e, a, _ in attr_triples], dtype=np.int64).reshape(-1, 2)
    values = tuple(v for _, _, v in attr_triples)
    if n_attributes == 0:
        n_attributes = int(pairs[:, 1].max()) + 1 if len(pairs) else 1
    return KnowledgeGraph(
        relation_triples=triples,
        attribute_pairs=pairs,
        attribute_values=values,
        entity_labels=tuple(f"e{i}" for i in range(n_entities)),
        relation_labels=tuple(f"r{i}" for i in range(n_relations)),
        attribute_labels=tuple(f"a{i}" for i in range(n_attributes)),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
