"""Feature embedding ops: widths, determinism, UNK rule, differentiability."""

import numpy as np
import pytest

from helpers import fd_check, finite_difference
from layoutgraph import tensor as T
from layoutgraph.embeddings import (
    CorpusStats,
    EmbeddingConfig,
    HashedFeatureProvider,
    P_ELEMENT_PROJ,
    P_POS_TABLE,
    P_SIZE_TABLE,
    P_TYPE_MATRIX,
    UNK_TOKEN,
    constraint_node_features,
    element_node_features,
    embed_position,
    embed_size,
    embed_text,
    embed_type,
)
from layoutgraph.model import (
    AlignmentKind,
    BBox,
    ConstraintKind,
    ConstraintNode,
    Element,
    ValidationError,
)
from layoutgraph.params import ModelConfig, ModelParams

CFG = EmbeddingConfig(coord_dim=16, node_dim=64, type_dim=8, text_dim=16,
                      appearance_dim=16, coord_max=640,
                      type_vocab=("Text", "Image", "Button"))


@pytest.fixture()
def tensors():
    params = ModelParams.initialize(ModelConfig(embedding=CFG, gnn_layers=1), seed=0)
    return params.tensors(trainable=True)


class TestPosition:
    def test_width_is_4x_coord_dim(self, tensors):
        out = embed_position(BBox(10, 20, 30, 40), tensors[P_POS_TABLE])
        assert out.shape == (1, 64)  # coord_dim=16 -> 64-wide position embedding

    def test_identical_bboxes_identical_embeddings(self, tensors):
        a = embed_position(BBox(5, 6, 7, 8), tensors[P_POS_TABLE])
        b = embed_position(BBox(5, 6, 7, 8), tensors[P_POS_TABLE])
        assert np.array_equal(a.data, b.data)

    def test_out_of_range_rejected(self, tensors):
        with pytest.raises(ValidationError):
            embed_position(BBox(630, 0, 20, 10), tensors[P_POS_TABLE])  # x2 = 650

    def test_gradient_hits_only_looked_up_rows(self):
        table = T.Tensor(np.random.default_rng(0).normal(size=(32, 4)),
                         requires_grad=True)
        with T.Tape() as tape:
            out = embed_position(BBox(3, 7, 5, 6), table)  # rows 3,7,8,13
            tape.backward(T.sum_all(out))
        g = tape.grad(table)
        touched = {i for i in range(32) if np.abs(g[i]).sum() > 0}
        assert touched == {3, 7, 8, 13}

    def test_lookup_gradient_matches_fd(self):
        arr = np.random.default_rng(1).normal(size=(20, 3))

        def f():
            t = T.Tensor(arr)
            return T.sum_all(T.sigmoid(embed_position(BBox(1, 2, 3, 4), t))).item()

        t = T.Tensor(arr, requires_grad=True)
        with T.Tape() as tape:
            tape.backward(T.sum_all(T.sigmoid(embed_position(BBox(1, 2, 3, 4), t))))
        fd_check(tape.grad(t), finite_difference(f, arr))


class TestSize:
    def test_width_is_2x_coord_dim(self, tensors):
        out = embed_size(30, 40, tensors[P_SIZE_TABLE])
        assert out.shape == (1, 32)

    def test_paper_compat_dim(self):
        # coord_dim=128 yields the 256-wide size embedding reading
        cfg = EmbeddingConfig(coord_dim=128, node_dim=64, coord_max=64)
        params = ModelParams.initialize(ModelConfig(embedding=cfg, gnn_layers=1), seed=0)
        out = embed_size(10, 20, params.tensors()[P_SIZE_TABLE])
        assert out.shape == (1, 256)

    def test_equal_sizes_equal_embeddings(self, tensors):
        a = embed_size(100, 50, tensors[P_SIZE_TABLE])
        b = embed_size(100, 50, tensors[P_SIZE_TABLE])
        assert np.array_equal(a.data, b.data)

    def test_perturbing_w_changes_only_w_half(self, tensors):
        a = embed_size(100, 50, tensors[P_SIZE_TABLE]).data
        b = embed_size(101, 50, tensors[P_SIZE_TABLE]).data
        assert not np.array_equal(a[:, :16], b[:, :16])
        assert np.array_equal(a[:, 16:], b[:, 16:])


class TestType:
    def test_one_hot_through_matrix_is_row(self, tensors):
        out = embed_type("Button", tensors[P_TYPE_MATRIX], CFG)
        assert np.array_equal(out.data[0], tensors[P_TYPE_MATRIX].data[2])

    def test_identity_matrix_returns_one_hot(self):
        table = T.Tensor(np.eye(3))
        out = embed_type("Button", table, CFG)
        assert out.data.tolist() == [[0.0, 0.0, 1.0]]

    def test_all_kinds_distinct_with_random_matrix(self):
        from layoutgraph.model import DEFAULT_TYPE_VOCAB

        cfg = EmbeddingConfig(coord_dim=4, node_dim=32, type_dim=6, coord_max=64)
        table = T.Tensor(np.random.default_rng(2).normal(size=(18, 6)))
        rows = [embed_type(k, table, cfg).data.tobytes() for k in DEFAULT_TYPE_VOCAB]
        assert len(set(rows)) == 18

    def test_unknown_kind_rejected(self, tensors):
        with pytest.raises(ValidationError):
            embed_type("Blob", tensors[P_TYPE_MATRIX], CFG)


class TestText:
    provider = HashedFeatureProvider(16, 16)

    def test_rare_string_maps_to_unk(self):
        stats = CorpusStats({"hello": 2})
        out = embed_text("hello", stats, self.provider, unk_threshold=3)
        assert np.array_equal(out, self.provider.text_vector(UNK_TOKEN))

    def test_frequent_string_keeps_own_vector(self):
        stats = CorpusStats({"hello": 3})
        out = embed_text("hello", stats, self.provider, unk_threshold=3)
        assert np.array_equal(out, self.provider.text_vector("hello"))

    def test_absent_text_is_zero(self):
        out = embed_text(None, CorpusStats(), self.provider, unk_threshold=3)
        assert not out.any()

    def test_two_rare_strings_share_embedding(self):
        stats = CorpusStats({"aaa": 1, "zzz": 2})
        a = embed_text("aaa", stats, self.provider, unk_threshold=3)
        b = embed_text("zzz", stats, self.provider, unk_threshold=3)
        assert np.array_equal(a, b)

    def test_provider_deterministic(self):
        assert np.array_equal(self.provider.text_vector("Submit now"),
                              self.provider.text_vector("Submit now"))

    def test_appearance_folding(self):
        vec = list(range(40))
        folded = self.provider.appearance_vector(vec)
        assert folded.shape == (16,)
        # element 0 and 16 and 32 land in bucket 0
        assert folded[0] == 0 + 16 + 32


class TestElementFeatures:
    provider = HashedFeatureProvider(16, 16)
    stats = CorpusStats({"Submit": 10})

    def test_placed_width_is_node_dim(self, tensors):
        el = Element("a", "Button", BBox(10, 10, 100, 40), text="Submit")
        out = element_node_features(el, CFG, tensors, self.provider, self.stats)
        assert out.shape == (1, CFG.node_dim)

    def test_same_element_same_vector(self, tensors):
        el = Element("a", "Button", BBox(10, 10, 100, 40))
        a = element_node_features(el, CFG, tensors, self.provider, self.stats)
        b = element_node_features(el, CFG, tensors, self.provider, self.stats)
        assert np.array_equal(a.data, b.data)

    def test_unplaced_target_ignores_geometry_but_not_ratio(self, tensors):
        t1 = Element("t", "Button", None, aspect_ratio=2.0)
        t2 = Element("t", "Button", None, aspect_ratio=3.0)
        a = element_node_features(t1, CFG, tensors, self.provider, self.stats, as_target=True)
        b = element_node_features(t2, CFG, tensors, self.provider, self.stats, as_target=True)
        assert not np.array_equal(a.data, b.data)
        # a placed element rendered as target matches its unplaced twin
        placed = Element("t", "Button", BBox(5, 5, 100, 50))
        unplaced = placed.unplace()
        c = element_node_features(placed, CFG, tensors, self.provider, self.stats, as_target=True)
        d = element_node_features(unplaced, CFG, tensors, self.provider, self.stats, as_target=True)
        assert np.array_equal(c.data, d.data)

    def test_projection_gradient_flows(self, tensors):
        el = Element("a", "Button", BBox(10, 10, 100, 40), text="Submit")
        with T.Tape() as tape:
            out = element_node_features(el, CFG, tensors, self.provider, self.stats)
            tape.backward(T.sum_all(out))
        assert tape.grad(tensors[P_ELEMENT_PROJ]) is not None
        assert tape.grad(tensors[P_POS_TABLE]) is not None


class TestConstraintFeatures:
    def test_left_alignment_is_projected_normalized_attr(self, tensors):
        c = ConstraintNode("c", ConstraintKind.ALIGNMENT, ("a", "b"),
                           align_kind=AlignmentKind.LEFT, line=100)
        out = constraint_node_features(c, CFG, tensors, canvas_w=360, canvas_h=640)
        from layoutgraph.embeddings import constraint_proj_name

        attr = np.array([[1, 0, 0, 0, 0, 0, 100 / 360, 0.0]])
        expected = attr @ tensors[constraint_proj_name(ConstraintKind.ALIGNMENT)].data
        assert np.allclose(out.data, expected, atol=1e-15)

    def test_same_size_projection(self, tensors):
        c = ConstraintNode("c", ConstraintKind.SAME_SIZE, ("a", "b"),
                           size_kind="width", size_value=200)
        out = constraint_node_features(c, CFG, tensors, canvas_w=360, canvas_h=640)
        from layoutgraph.embeddings import constraint_proj_name

        attr = np.array([[200 / 360, 0.0]])
        expected = attr @ tensors[constraint_proj_name(ConstraintKind.SAME_SIZE)].data
        assert np.allclose(out.data, expected, atol=1e-15)

    def test_two_element_groups_identical_features(self, tensors):
        g1 = ConstraintNode("g1", ConstraintKind.ELEMENT_GROUP, ("a", "b"))
        g2 = ConstraintNode("g2", ConstraintKind.ELEMENT_GROUP, ("c", "d", "e"))
        a = constraint_node_features(g1, CFG, tensors, 360, 640)
        b = constraint_node_features(g2, CFG, tensors, 360, 640)
        assert np.array_equal(a.data, b.data)
