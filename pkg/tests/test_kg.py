import numpy as np
import pytest

from subgcn.kg import (DatasetError, KnowledgeGraph, SeedAlignment, SyntheticSpec,
                       attribute_features, generate_synthetic_pair, load_dbp15k,
                       serialize_dataset, shared_attribute_vocabulary, split_seeds)
from subgcn.sgn import build_skeleton

from conftest import make_kg


class TestKnowledgeGraph:
    def test_rejects_invalid_entity_reference(self):
        with pytest.raises(ValueError):
            make_kg(2, [(0, 0, 5)])

    def test_rejects_invalid_relation_reference(self):
        with pytest.raises(ValueError):
            make_kg(2, [(0, 7, 1)], n_relations=1)

    def test_rejects_invalid_attribute_reference(self):
        with pytest.raises(ValueError):
            make_kg(2, [], attr_triples=[(0, 9, "x")], n_attributes=2)

    def test_duplicate_relation_triples_kept(self):
        kg = make_kg(2, [(0, 0, 1), (0, 0, 1)])
        assert len(kg.relation_triples) == 2

    def test_summary_counts(self):
        kg = make_kg(3, [(0, 0, 1)], attr_triples=[(0, 0, "v"), (1, 0, "w")])
        s = kg.summary()
        assert s == {"entities": 3, "relations": 1, "attributes": 1,
                     "relation_triples": 1, "attribute_triples": 2}


class TestSeedAlignment:
    def test_rejects_duplicate_side_entries(self):
        with pytest.raises(ValueError):
            SeedAlignment(pairs=np.array([[0, 1], [0, 2]]))
        with pytest.raises(ValueError):
            SeedAlignment(pairs=np.array([[0, 1], [2, 1]]))

    def test_split_partitions(self):
        seeds = SeedAlignment(pairs=np.column_stack([np.arange(10), np.arange(10)]))
        for fraction in (0.2, 0.35, 0.5, 0.9):
            split = split_seeds(seeds, fraction, rng_seed=7)
            assert len(split.train_pairs) + len(split.test_pairs) == 10
            assert len(split.train_pairs) == int(np.floor(fraction * 10))

    def test_split_deterministic(self):
        seeds = SeedAlignment(pairs=np.column_stack([np.arange(10), np.arange(10)]))
        a = split_seeds(seeds, 0.5, rng_seed=3)
        b = split_seeds(seeds, 0.5, rng_seed=3)
        assert np.array_equal(a.train_mask, b.train_mask)
        c = split_seeds(seeds, 0.5, rng_seed=4)
        assert not np.array_equal(a.train_mask, c.train_mask)

    def test_reference_fraction_counts(self):
        seeds = SeedAlignment(pairs=np.column_stack([np.arange(15000), np.arange(15000)]))
        split = split_seeds(seeds, 0.30, rng_seed=1)
        assert len(split.train_pairs) == 4500
        assert len(split.test_pairs) == 10500

    def test_degenerate_split_rejected(self):
        seeds = SeedAlignment(pairs=np.column_stack([np.arange(10), np.arange(10)]))
        with pytest.raises(ValueError):
            split_seeds(seeds, 0.05, rng_seed=1)   # floor -> 0 train pairs
        # floor(0.999 * 10) = 9 train / 1 test is fine
        split = split_seeds(seeds, 0.999, rng_seed=1)
        assert len(split.train_pairs) == 9

    def test_bad_fraction_rejected(self):
        seeds = SeedAlignment(pairs=np.column_stack([np.arange(4), np.arange(4)]))
        for fraction in (0.0, 1.0, -0.1, 1.5):
            with pytest.raises(ValueError):
                split_seeds(seeds, fraction, rng_seed=1)


class TestSynthetic:
    SPEC = SyntheticSpec(n_entities=200, n_relations=20, n_rel_triples=800,
                         n_attributes=50, rng_seed=42)

    def test_full_bijection(self):
        _, _, seeds = generate_synthetic_pair(self.SPEC)
        assert len(seeds) == 200

    def test_deterministic(self):
        kg1a, kg2a, seeds_a = generate_synthetic_pair(self.SPEC)
        kg1b, kg2b, seeds_b = generate_synthetic_pair(self.SPEC)
        assert np.array_equal(kg1a.relation_triples, kg1b.relation_triples)
        assert np.array_equal(kg2a.relation_triples, kg2b.relation_triples)
        assert kg1a.attribute_values == kg1b.attribute_values
        assert np.array_equal(seeds_a.pairs, seeds_b.pairs)

    def test_zero_perturbation_isomorphic_skeletons(self):
        kg1, kg2, seeds = generate_synthetic_pair(self.SPEC)
        perm = seeds.pairs[:, 1]
        deg1 = build_skeleton(kg1).degrees()
        deg2 = build_skeleton(kg2).degrees()
        assert np.array_equal(deg1, deg2[perm])
        # edge sets match exactly under the permutation
        e1 = {tuple(sorted((perm[u], perm[v]))) for u, v in build_skeleton(kg1).edges}
        e2 = {tuple(e) for e in build_skeleton(kg2).edges}
        assert e1 == e2

    def test_perturbation_changes_triples(self):
        spec = SyntheticSpec(n_entities=100, n_relations=5, n_rel_triples=300,
                             n_attributes=10, perturbation_rate=0.2, rng_seed=1)
        kg1, kg2, seeds = generate_synthetic_pair(spec)
        perm = seeds.pairs[:, 1]
        mapped = kg1.relation_triples.copy()
        mapped[:, 0] = perm[kg1.relation_triples[:, 0]]
        mapped[:, 2] = perm[kg1.relation_triples[:, 2]]
        changed = np.any(mapped != kg2.relation_triples, axis=1).sum()
        assert changed == round(0.2 * 300)

    def test_too_many_triples_rejected(self):
        with pytest.raises(ValueError):
            generate_synthetic_pair(SyntheticSpec(
                n_entities=3, n_relations=2, n_rel_triples=7, n_attributes=2))

    def test_invalid_spec_rejected(self):
        with pytest.raises(ValueError):
            SyntheticSpec(n_entities=0, n_relations=1, n_rel_triples=1, n_attributes=1)
        with pytest.raises(ValueError):
            SyntheticSpec(n_entities=2, n_relations=1, n_rel_triples=1,
                          n_attributes=1, perturbation_rate=1.5)


class TestDatasetIO:
    def test_round_trip(self, tmp_path):
        spec = SyntheticSpec(n_entities=40, n_relations=4, n_rel_triples=100,
                             n_attributes=8, perturbation_rate=0.1, rng_seed=5)
        kg1, kg2, seeds = generate_synthetic_pair(spec)
        serialize_dataset(kg1, kg2, seeds, tmp_path / "data")
        r1, r2, rseeds = load_dbp15k(tmp_path / "data")
        for orig, back in ((kg1, r1), (kg2, r2)):
            assert np.array_equal(orig.relation_triples, back.relation_triples)
            assert np.array_equal(orig.attribute_pairs, back.attribute_pairs)
            assert orig.attribute_values == back.attribute_values
            assert orig.entity_labels == back.entity_labels
            assert orig.relation_labels == back.relation_labels
            assert orig.attribute_labels == back.attribute_labels
        assert np.array_equal(seeds.pairs, rseeds.pairs)
        # and a second serialize produces identical bytes
        serialize_dataset(r1, r2, rseeds, tmp_path / "data2")
        for name in ("ent_ids_1", "rel_ids_2", "triples_1", "attr_triples_2",
                     "ref_ent_ids"):
            assert (tmp_path / "data" / name).read_bytes() == \
                   (tmp_path / "data2" / name).read_bytes()

    def test_missing_file(self, tmp_path):
        with pytest.raises(DatasetError, match="ref_ent_ids|ent_ids_1"):
            load_dbp15k(tmp_path)

    def _write_minimal(self, root):
        root.mkdir(exist_ok=True)
        (root / "ent_ids_1").write_text("10\tA\n11\tB\n")
        (root / "ent_ids_2").write_text("20\tX\n21\tY\n")
        (root / "rel_ids_1").write_text("0\tr\n")
        (root / "rel_ids_2").write_text("0\ts\n")
        (root / "triples_1").write_text("10\t0\t11\n")
        (root / "triples_2").write_text("20\t0\t21\n")
        (root / "attr_triples_1").write_text("10\tname\tAlpha\n")
        (root / "attr_triples_2").write_text("20\tname\tBeta\n")
        (root / "ref_ent_ids").write_text("10\t20\n11\t21\n")

    def test_reindexes_densely_and_auto_indexes_attributes(self, tmp_path):
        root = tmp_path / "mini"
        self._write_minimal(root)
        kg1, kg2, seeds = load_dbp15k(root)
        assert kg1.entity_labels == ("A", "B")
        assert np.array_equal(kg1.relation_triples, [[0, 0, 1]])
        assert kg1.attribute_labels == ("name",)
        assert np.array_equal(seeds.pairs, [[0, 0], [1, 1]])
        assert seeds.train_mask is None

    def test_malformed_line_reports_location(self, tmp_path):
        root = tmp_path / "mini"
        self._write_minimal(root)
        (root / "triples_1").write_text("10\t0\n")
        with pytest.raises(DatasetError, match=r"triples_1:1"):
            load_dbp15k(root)

    def test_non_integer_id_reports_location(self, tmp_path):
        root = tmp_path / "mini"
        self._write_minimal(root)
        (root / "triples_1").write_text("10\tzero\t11\n")
        with pytest.raises(DatasetError, match="non-integer"):
            load_dbp15k(root)

    def test_undeclared_entity_reports_location(self, tmp_path):
        root = tmp_path / "mini"
        self._write_minimal(root)
        (root / "triples_1").write_text("10\t0\t99\n")
        with pytest.raises(DatasetError, match=r"triples_1:1.*undeclared entity"):
            load_dbp15k(root)

    def test_attribute_value_may_contain_tabs(self, tmp_path):
        root = tmp_path / "mini"
        self._write_minimal(root)
        (root / "attr_triples_1").write_text("10\tname\tAlpha\tBeta\n")
        kg1, _, _ = load_dbp15k(root)
        assert kg1.attribute_values == ("Alpha\tBeta",)

    def test_attr_ids_file_used_when_present(self, tmp_path):
        root = tmp_path / "mini"
        self._write_minimal(root)
        (root / "attr_ids_1").write_text("5\tbirthdate\n")
        (root / "attr_triples_1").write_text("10\t5\t1950\n")
        kg1, _, _ = load_dbp15k(root)
        assert kg1.attribute_labels == ("birthdate",)
        assert np.array_equal(kg1.attribute_pairs, [[0, 0]])


class TestAttributeVocabulary:
    def test_merges_by_label_and_caps(self):
        kg1 = make_kg(3, [], attr_triples=[(0, 0, "x"), (1, 0, "x"), (2, 1, "x")],
                      n_attributes=2)
        kg2 = make_kg(2, [], attr_triples=[(0, 1, "y")], n_attributes=2)
        # kg labels are a0, a1 on both sides: a0 used 2+0, a1 used 1+1 times
        vocab = shared_attribute_vocabulary(kg1, kg2, cap=2)
        assert vocab.labels == ("a0", "a1")
        assert vocab.kg1_columns.tolist() == [0, 1]
        assert vocab.kg2_columns.tolist() == [0, 1]
        capped = shared_attribute_vocabulary(kg1, kg2, cap=1)
        assert capped.labels == ("a0",)
        assert capped.kg2_columns.tolist() == [0, -1]

    def test_tie_broken_by_label(self):
        kg1 = make_kg(1, [], attr_triples=[(0, 0, "x")], n_attributes=2)
        kg2 = make_kg(1, [], attr_triples=[(0, 1, "y")], n_attributes=2)
        vocab = shared_attribute_vocabulary(kg1, kg2, cap=2)
        assert vocab.labels == ("a0", "a1")

    def test_feature_matrix_is_binary_multi_hot(self):
        kg = make_kg(3, [], attr_triples=[(0, 0, "p"), (0, 0, "q"), (0, 1, "r")],
                     n_attributes=2)
        vocab = shared_attribute_vocabulary(kg, kg, cap=5)
        feats = attribute_features(kg, vocab.kg1_columns, vocab.size)
        dense = feats.to_dense()
        assert dense.shape == (3, 2)
        assert dense[0].tolist() == [1.0, 1.0]   # repeated (0, a0) collapses to 1
        assert np.all(dense[1] == 0.0) and np.all(dense[2] == 0.0)
