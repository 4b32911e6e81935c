import numpy as np
import pytest

from subgcn.encoder import (EmbeddingSet, GcnChannel, GcnChannelConfig,
                            CheckpointError, init_channel, load_channel,
                            save_channel)
from subgcn.matrices import NormalizedAdjacency, SparseMatrix, normalize

from conftest import make_kg  # noqa: F401  (rng fixture import side)


def dense_two_layer(adj_dense, h0, w1, w2, final_relu=False):
    """Independent dense reference for one graph's forward pass."""
    z1 = adj_dense @ (h0 @ w1)
    h1 = np.maximum(z1, 0.0)
    z2 = adj_dense @ (h1 @ w2)
    return np.maximum(z2, 0.0) if final_relu else z2


def random_adjacency(rng, n):
    dense = (rng.random((n, n)) < 0.4) * rng.random((n, n))
    return normalize(SparseMatrix.from_dense(dense))


def structure_channel(rng_seed, n1=6, n2=7, d=4, final="identity"):
    cfg = GcnChannelConfig("structure", d, d, d, final)
    return init_channel(cfg, n1, n2, rng_seed)


class TestInit:
    def test_same_seed_identical_weights(self):
        a = structure_channel(11)
        b = structure_channel(11)
        assert np.array_equal(a.W1, b.W1)
        assert np.array_equal(a.W2, b.W2)
        assert np.array_equal(a.inputs[0], b.inputs[0])
        c = structure_channel(12)
        assert not np.array_equal(a.W1, c.W1)

    def test_structure_input_shape_and_bounds(self):
        ch = structure_channel(5, n1=10, d=4)
        assert ch.inputs[0].shape == (10, 4)
        assert np.abs(ch.inputs[0]).max() <= 1.0 / np.sqrt(4)
        bound = np.sqrt(6.0 / 8)
        assert np.abs(ch.W1).max() <= bound

    def test_subgraph_inputs_padded_to_max(self):
        cfg = GcnChannelConfig("subgraph", 7, 3, 3)
        f1 = SparseMatrix.from_triplets(4, 5, [0, 1], [0, 4], [1.0, 1.0])
        f2 = SparseMatrix.from_triplets(4, 7, [2], [6], [1.0])
        ch = init_channel(cfg, f1, f2, 0)
        assert ch.inputs[0].cols == 7 and ch.inputs[1].cols == 7
        assert np.array_equal(ch.inputs[0].to_dense()[:, :5], f1.to_dense())

    def test_too_wide_features_rejected(self):
        cfg = GcnChannelConfig("subgraph", 3, 2, 2)
        wide = SparseMatrix.from_triplets(2, 5, [0], [4], [1.0])
        with pytest.raises(ValueError, match="exceeds"):
            init_channel(cfg, wide, wide, 0)

    def test_structure_dims_must_agree(self):
        with pytest.raises(ValueError):
            GcnChannelConfig("structure", 4, 4, 3)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            GcnChannelConfig("spectral", 4, 4, 4)


class TestForward:
    def test_zero_weights_zero_embeddings(self, rng):
        ch = structure_channel(3)
        ch.W1[:] = 0.0
        ch.W2[:] = 0.0
        e1, e2 = ch.forward(random_adjacency(rng, 6), random_adjacency(rng, 7))
        assert np.all(e1 == 0.0) and np.all(e2 == 0.0)

    def test_identity_path_returns_input(self):
        ch = structure_channel(4, n1=5, n2=5, d=3)
        ch.W1[:] = np.eye(3)
        ch.W2[:] = np.eye(3)
        ch.inputs[0] = np.abs(ch.inputs[0])
        ch.inputs[1] = np.abs(ch.inputs[1])
        eye = NormalizedAdjacency(SparseMatrix.identity(5))
        e1, e2 = ch.forward(eye, eye)
        assert np.array_equal(e1, ch.inputs[0])
        assert np.array_equal(e2, ch.inputs[1])

    def test_matches_dense_oracle(self, rng):
        adj1 = random_adjacency(rng, 6)
        adj2 = random_adjacency(rng, 7)
        for kind, final in (("structure", "identity"), ("structure", "relu")):
            ch = structure_channel(9, final=final)
            e1, e2 = ch.forward(adj1, adj2)
            ref1 = dense_two_layer(adj1.matrix.to_dense(), ch.inputs[0], ch.W1,
                                   ch.W2, final_relu=(final == "relu"))
            assert np.abs(e1 - ref1).max() < 1e-12

    def test_sparse_input_channel_matches_oracle(self, rng):
        cfg = GcnChannelConfig("attribute", 5, 3, 3)
        f1 = SparseMatrix.from_dense((rng.random((6, 5)) < 0.4).astype(float))
        f2 = SparseMatrix.from_dense((rng.random((7, 5)) < 0.4).astype(float))
        ch = init_channel(cfg, f1, f2, 21)
        adj1, adj2 = random_adjacency(rng, 6), random_adjacency(rng, 7)
        e1, e2 = ch.forward(adj1, adj2)
        ref2 = dense_two_layer(adj2.matrix.to_dense(), f2.to_dense(), ch.W1, ch.W2)
        assert np.abs(e2 - ref2).max() < 1e-12

    def test_relu_layers_never_negative(self, rng):
        ch = structure_channel(2, final="relu")
        e1, e2 = ch.forward(random_adjacency(rng, 6), random_adjacency(rng, 7))
        assert e1.min() >= 0.0 and e2.min() >= 0.0

    def test_adjacency_size_mismatch(self, rng):
        ch = structure_channel(2)
        with pytest.raises(ValueError, match="entity count"):
            ch.forward(random_adjacency(rng, 5), random_adjacency(rng, 7))

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_non_finite_forward_rejected(self, rng):
        ch = structure_channel(2)
        ch.W1[0, 0] = np.inf
        with pytest.raises(FloatingPointError):
            ch.forward(random_adjacency(rng, 6), random_adjacency(rng, 7))

    def test_equivariance_under_entity_permutation(self, rng):
        n1 = 6
        adj1 = random_adjacency(rng, n1)
        adj2 = random_adjacency(rng, 7)
        ch = structure_channel(33, n1=n1)
        e1, _ = ch.forward(adj1, adj2)
        perm = rng.permutation(n1)
        adj1_dense = adj1.matrix.to_dense()
        adj1_perm = NormalizedAdjacency(
            SparseMatrix.from_dense(adj1_dense[np.ix_(perm, perm)]))
        permuted = GcnChannel(ch.config, ch.W1.copy(), ch.W2.copy(),
                              ch.inputs[0][perm].copy(), ch.inputs[1].copy(), 0)
        e1p, _ = permuted.forward(adj1_perm, adj2)
        assert np.abs(e1p - e1[perm]).max() < 1e-12


class TestBackward:
    def test_zero_grad_output(self, rng):
        ch = structure_channel(7)
        ch.forward(random_adjacency(rng, 6), random_adjacency(rng, 7))
        grads = ch.backward(np.zeros((6, 4)), np.zeros((7, 4)))
        assert np.all(grads.dW1 == 0.0) and np.all(grads.dW2 == 0.0)
        assert np.all(grads.dH0_kg1 == 0.0) and np.all(grads.dH0_kg2 == 0.0)

    def test_backward_without_forward(self):
        ch = structure_channel(7)
        with pytest.raises(RuntimeError):
            ch.backward(np.zeros((6, 4)), np.zeros((7, 4)))

    def test_closed_form_with_identity_adjacency(self, rng):
        # A = I, W2 = I, all first-layer preactivations positive:
        # dW1 = (A H0)^T dZ1 = H0^T (G W2^T) = H0^T G
        ch = structure_channel(8, n1=5, n2=5, d=3)
        ch.inputs[0] = np.abs(ch.inputs[0]) + 0.1
        ch.inputs[1] = np.abs(ch.inputs[1]) + 0.1
        ch.W1[:] = np.eye(3)
        ch.W2[:] = np.eye(3)
        eye = NormalizedAdjacency(SparseMatrix.identity(5))
        ch.forward(eye, eye)
        g1 = rng.standard_normal((5, 3))
        g2 = np.zeros((5, 3))
        grads = ch.backward(g1, g2)
        assert np.abs(grads.dW1 - ch.inputs[0].T @ g1).max() < 1e-12

    def test_shared_weights_receive_gradient_from_both_graphs(self, rng):
        ch = structure_channel(5)
        ch.forward(random_adjacency(rng, 6), random_adjacency(rng, 7))
        only_kg2 = ch.backward(np.zeros((6, 4)), rng.standard_normal((7, 4)))
        assert np.abs(only_kg2.dW1).max() > 0.0
        assert np.abs(only_kg2.dW2).max() > 0.0

    @pytest.mark.parametrize("kind,final", [("structure", "identity"),
                                            ("structure", "relu"),
                                            ("attribute", "identity"),
                                            ("subgraph", "identity")])
    def test_gradients_match_finite_differences(self, rng, kind, final):
        n1, n2, d = 6, 5, 3
        adj1, adj2 = random_adjacency(rng, n1), random_adjacency(rng, n2)
        if kind == "structure":
            ch = init_channel(GcnChannelConfig(kind, d, d, d, final), n1, n2, 17)
        else:
            width = 4
            f1 = SparseMatrix.from_dense((rng.random((n1, width)) < 0.5).astype(float))
            f2 = SparseMatrix.from_dense((rng.random((n2, width)) < 0.5).astype(float))
            ch = init_channel(GcnChannelConfig(kind, width, d, d, final), f1, f2, 17)
        g1 = rng.standard_normal((n1, d))
        g2 = rng.standard_normal((n2, d))

        def loss():
            e1, e2 = ch.forward(adj1, adj2)
            return float((g1 * e1).sum() + (g2 * e2).sum())

        loss()
        grads = ch.backward(g1, g2)
        params = [(ch.W1, grads.dW1), (ch.W2, grads.dW2)]
        if ch.config.input_trainable:
            params += [(ch.inputs[0], grads.dH0_kg1), (ch.inputs[1], grads.dH0_kg2)]
        h = 1e-5
        worst = 0.0
        for tensor, analytic in params:
            it = np.nditer(tensor, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                keep = tensor[idx]
                tensor[idx] = keep + h
                up = loss()
                tensor[idx] = keep - h
                down = loss()
                tensor[idx] = keep
                numeric = (up - down) / (2 * h)
                err = abs(analytic[idx] - numeric) / max(1.0, abs(analytic[idx]),
                                                         abs(numeric))
                worst = max(worst, err)
        assert worst < 1e-4


class TestCheckpoints:
    def test_structure_round_trip_bit_exact(self, rng, tmp_path):
        ch = structure_channel(13)
        save_channel(ch, tmp_path / "ck", epoch=42)
        back, epoch = load_channel(tmp_path / "ck")
        assert epoch == 42
        assert np.array_equal(back.W1, ch.W1)
        assert np.array_equal(back.W2, ch.W2)
        assert np.array_equal(back.inputs[0], ch.inputs[0])
        assert np.array_equal(back.inputs[1], ch.inputs[1])
        adj1, adj2 = random_adjacency(rng, 6), random_adjacency(rng, 7)
        assert np.array_equal(ch.forward(adj1, adj2)[0], back.forward(adj1, adj2)[0])

    def test_fixed_input_channel_is_self_contained(self, rng, tmp_path):
        cfg = GcnChannelConfig("attribute", 4, 3, 3)
        f = SparseMatrix.from_dense(np.eye(4))
        ch = init_channel(cfg, f, f, 1)
        save_channel(ch, tmp_path / "ck", epoch=1)
        back, _ = load_channel(tmp_path / "ck")
        assert np.array_equal(back.W1, ch.W1)
        assert np.array_equal(back.inputs[0].to_dense(), ch.inputs[0].to_dense())
        adj = NormalizedAdjacency(SparseMatrix.identity(4))
        assert np.array_equal(ch.forward(adj, adj)[1], back.forward(adj, adj)[1])

    def test_missing_inputs_fall_back_to_supplied_features(self, tmp_path):
        cfg = GcnChannelConfig("attribute", 4, 3, 3)
        f = SparseMatrix.from_dense(np.eye(4))
        ch = init_channel(cfg, f, f, 1)
        save_channel(ch, tmp_path / "ck", epoch=1)
        (tmp_path / "ck" / "input_kg1.txt").unlink()
        (tmp_path / "ck" / "input_kg2.txt").unlink()
        with pytest.raises(CheckpointError, match="missing"):
            load_channel(tmp_path / "ck")
        back, _ = load_channel(tmp_path / "ck", f, f)
        assert np.array_equal(back.W1, ch.W1)
        too_wide = SparseMatrix.from_dense(np.ones((4, 9)))
        with pytest.raises(CheckpointError, match="input_dim"):
            load_channel(tmp_path / "ck", too_wide, too_wide)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(CheckpointError, match="manifest"):
            load_channel(tmp_path)


class TestEmbeddingSet:
    def test_row_count_consistency_enforced(self, rng):
        with pytest.raises(ValueError):
            EmbeddingSet(kg1={"structure": rng.random((4, 2)),
                              "attribute": rng.random((5, 2))},
                         kg2={"structure": rng.random((4, 2))})

    def test_non_finite_rejected(self):
        bad = np.full((2, 2), np.nan)
        with pytest.raises(ValueError):
            EmbeddingSet(kg1={"structure": bad}, kg2={"structure": bad})

    def test_dims(self, rng):
        es = EmbeddingSet(kg1={"structure": rng.random((3, 4))},
                          kg2={"structure": rng.random((5, 4))})
        assert es.dims() == {"structure": 4}
