"""Value types, JSON round-trips, and graph construction."""

import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from layoutgraph.model import (
    AlignmentKind,
    BBox,
    ConstraintKind,
    ConstraintNode,
    Element,
    Gui,
    ValidationError,
    ParseError,
    build_graph,
    constraints_from_json,
    constraints_to_json,
    gui_from_json,
    gui_to_json,
)
from layoutgraph.synthetic import gen_synthetic


def make_gui(*elements, w=1440, h=2560):
    return Gui(w, h, tuple(elements))


class TestBBox:
    def test_round_trip_fields(self):
        b = BBox(100, 100, 200, 80)
        assert (b.x, b.y, b.w, b.h) == (100, 100, 200, 80)
        assert b.x2 == 300 and b.y2 == 180
        assert b.ratio == 2.5

    @pytest.mark.parametrize("w,h", [(0, 10), (10, 0), (-5, 10)])
    def test_rejects_nonpositive_size(self, w, h):
        with pytest.raises(ValidationError):
            BBox(0, 0, w, h)

    def test_rejects_non_integers(self):
        with pytest.raises(ValidationError):
            BBox(0.5, 0, 10, 10)


class TestElement:
    def test_placed_normalizes_ratio(self):
        e = Element("a", "Button", BBox(0, 0, 200, 80))
        assert e.aspect_ratio == 2.5

    def test_unplaced_requires_ratio(self):
        with pytest.raises(ValidationError):
            Element("a", "Button", None)
        e = Element("a", "Button", None, aspect_ratio=2.0)
        assert not e.placed

    def test_declared_ratio_must_match_bbox(self):
        with pytest.raises(ValidationError):
            Element("a", "Button", BBox(0, 0, 200, 80), aspect_ratio=1.0)
        # within 1 px of rounding is fine
        Element("a", "Button", BBox(0, 0, 200, 80), aspect_ratio=200 / 81)

    def test_place_unplace_round_trip(self):
        e = Element("a", "Button", None, aspect_ratio=2.5)
        placed = e.place(BBox(10, 10, 200, 80))
        assert placed.placed and placed.aspect_ratio == 2.5
        assert not placed.unplace().placed


class TestGuiJson:
    def test_single_button_round_trip(self):
        doc = {"canvas": {"w": 1440, "h": 2560},
               "elements": [{"id": "b1", "kind": "Button",
                             "bbox": {"x": 100, "y": 100, "w": 200, "h": 80}}]}
        gui = gui_from_json(json.dumps(doc).encode())
        assert len(gui.placed) == 1
        assert gui.element("b1").bbox == BBox(100, 100, 200, 80)

    def test_zero_width_rejected(self):
        doc = {"canvas": {"w": 100, "h": 100},
               "elements": [{"id": "a", "kind": "Text",
                             "bbox": {"x": 0, "y": 0, "w": 0, "h": 10}}]}
        with pytest.raises(ValidationError):
            gui_from_json(json.dumps(doc).encode())

    def test_duplicate_id_rejected(self):
        doc = {"canvas": {"w": 100, "h": 100},
               "elements": [
                   {"id": "a", "kind": "Text", "bbox": {"x": 0, "y": 0, "w": 5, "h": 5}},
                   {"id": "a", "kind": "Text", "bbox": {"x": 9, "y": 9, "w": 5, "h": 5}}]}
        with pytest.raises(ValidationError):
            gui_from_json(json.dumps(doc).encode())

    def test_unknown_kind_rejected(self):
        doc = {"canvas": {"w": 100, "h": 100},
               "elements": [{"id": "a", "kind": "Blob",
                             "bbox": {"x": 0, "y": 0, "w": 5, "h": 5}}]}
        with pytest.raises(ValidationError):
            gui_from_json(json.dumps(doc).encode())

    def test_malformed_json_is_parse_error(self):
        with pytest.raises(ParseError):
            gui_from_json(b"{nope")

    def test_empty_gui_minimal_document(self):
        gui = Gui(100, 200)
        doc = json.loads(gui_to_json(gui))
        assert doc == {"canvas": {"h": 200, "w": 100}, "elements": []}

    def test_synthetic_round_trip_preserves_ids_in_order(self):
        for gui in gen_synthetic(11, 5):
            back = gui_from_json(gui_to_json(gui))
            assert back == gui
            assert [e.id for e in back.elements] == [e.id for e in gui.elements]

    def test_canonical_bytes_equal_for_semantically_equal_guis(self):
        # same GUI described with shuffled key order and a derivable ratio
        a = {"canvas": {"w": 300, "h": 300},
             "elements": [{"kind": "Button", "id": "b",
                           "bbox": {"w": 100, "h": 50, "x": 10, "y": 20},
                           "aspect_ratio": 2.0}]}
        b = {"elements": [{"id": "b", "bbox": {"x": 10, "y": 20, "w": 100, "h": 50},
                           "kind": "Button"}],
             "canvas": {"h": 300, "w": 300}}
        assert gui_to_json(gui_from_json(json.dumps(a).encode())) == \
            gui_to_json(gui_from_json(json.dumps(b).encode()))


# Randomized round-trip property over generated GUIs.
_kind = st.sampled_from(["Text", "Image", "Button", "ListItem"])


@st.composite
def guis(draw):
    n = draw(st.integers(0, 6))
    elements = []
    for i in range(n):
        placed = draw(st.booleans())
        if placed:
            x = draw(st.integers(0, 200))
            y = draw(st.integers(0, 200))
            w = draw(st.integers(1, 100))
            h = draw(st.integers(1, 100))
            bbox = BBox(x, y, w, h)
            elements.append(Element(f"e{i}", draw(_kind), bbox,
                                    text=draw(st.none() | st.text(max_size=8))))
        else:
            ratio = draw(st.floats(0.2, 5.0, allow_nan=False))
            elements.append(Element(f"e{i}", draw(_kind), None, aspect_ratio=ratio))
    return Gui(400, 400, tuple(elements), draw(st.none() | st.sampled_from(["list", "form"])))


@settings(max_examples=60, deadline=None)
@given(guis())
def test_round_trip_identity_property(gui):
    assert gui_from_json(gui_to_json(gui)) == gui
    # and emission is stable
    assert gui_to_json(gui_from_json(gui_to_json(gui))) == gui_to_json(gui)


class TestConstraints:
    def test_alignment_attr_layout(self):
        c = ConstraintNode("c", ConstraintKind.ALIGNMENT, ("a", "b"),
                           align_kind=AlignmentKind.LEFT, line=100)
        assert c.attr().tolist() == [1, 0, 0, 0, 0, 0, 100, 0]
        c2 = ConstraintNode("c2", ConstraintKind.ALIGNMENT, ("a", "b"),
                            align_kind=AlignmentKind.TOP, line=40)
        assert c2.attr().tolist() == [0, 1, 0, 0, 0, 0, 0, 40]

    def test_same_size_attr_layout(self):
        w = ConstraintNode("w", ConstraintKind.SAME_SIZE, ("a", "b"),
                           size_kind="width", size_value=200)
        assert w.attr().tolist() == [200, 0]
        h = ConstraintNode("h", ConstraintKind.SAME_SIZE, ("a", "b"),
                           size_kind="height", size_value=80)
        assert h.attr().tolist() == [0, 80]

    def test_group_attr_is_zero_slot(self):
        g = ConstraintNode("g", ConstraintKind.ELEMENT_GROUP, ("a", "b"))
        assert g.attr().shape == (8,)
        assert not g.attr().any()

    def test_constraint_json_round_trip(self):
        cons = [
            ConstraintNode("a1", ConstraintKind.ALIGNMENT, ("x", "y"),
                           align_kind=AlignmentKind.VMID, line=180),
            ConstraintNode("s1", ConstraintKind.SAME_SIZE, ("x", "y"),
                           size_kind="height", size_value=44),
            ConstraintNode("g1", ConstraintKind.MULTIMODAL_GROUP, ("x", "y", "z")),
        ]
        back = constraints_from_json(constraints_to_json(cons))
        assert list(back) == cons


class TestBuildGraph:
    def _three(self):
        return make_gui(
            Element("a", "Text", BBox(10, 0, 50, 20)),
            Element("b", "Text", BBox(10, 30, 50, 20)),
            Element("c", "Text", BBox(10, 60, 50, 20)),
        )

    def test_full_membership_adjacency(self):
        gui = self._three()
        c = ConstraintNode("al", ConstraintKind.ALIGNMENT, ("a", "b", "c"),
                           align_kind=AlignmentKind.LEFT, line=10)
        g = build_graph(gui, [c])
        assert g.adjacency.shape == (3, 1)
        assert g.adjacency.all()

    def test_degree_below_two_dropped(self):
        gui = self._three()
        c = ConstraintNode("al", ConstraintKind.ALIGNMENT, ("a",),
                           align_kind=AlignmentKind.LEFT, line=10)
        g = build_graph(gui, [c])
        assert g.adjacency.shape == (3, 0)
        assert g.num_constraints == 0

    def test_unknown_member_rejected(self):
        gui = self._three()
        c = ConstraintNode("al", ConstraintKind.ALIGNMENT, ("a", "zz"),
                           align_kind=AlignmentKind.LEFT, line=10)
        with pytest.raises(ValidationError):
            build_graph(gui, [c])

    def test_bipartite_by_construction(self):
        # Adjacency only relates element rows to constraint columns; there is
        # no element-element or constraint-constraint edge representation.
        gui = self._three()
        c1 = ConstraintNode("al", ConstraintKind.ALIGNMENT, ("a", "b"),
                            align_kind=AlignmentKind.LEFT, line=10)
        c2 = ConstraintNode("g", ConstraintKind.ELEMENT_GROUP, ("b", "c"))
        g = build_graph(gui, [c1, c2])
        assert g.adjacency.shape == (3, 2)
        assert g.adjacency.sum() == 4

    def test_reorder_invariance_up_to_permutation(self):
        gui = self._three()
        c = ConstraintNode("al", ConstraintKind.ALIGNMENT, ("a", "c"),
                           align_kind=AlignmentKind.LEFT, line=10)
        g1 = build_graph(gui, [c])
        permuted = Gui(gui.canvas_w, gui.canvas_h, gui.elements[::-1])
        g2 = build_graph(permuted, [c])
        perm = [g2.element_ids.index(eid) for eid in g1.element_ids]
        assert np.array_equal(g1.adjacency, g2.adjacency[perm, :])

    def test_kind_slices_are_contiguous_and_ordered(self):
        gui = self._three()
        cons = [
            ConstraintNode("g", ConstraintKind.ELEMENT_GROUP, ("a", "b")),
            ConstraintNode("al", ConstraintKind.ALIGNMENT, ("a", "b"),
                           align_kind=AlignmentKind.LEFT, line=10),
            ConstraintNode("s", ConstraintKind.SAME_SIZE, ("a", "b"),
                           size_kind="width", size_value=50),
        ]
        g = build_graph(gui, cons)
        assert [c.kind for c in g.constraints] == [
            ConstraintKind.ALIGNMENT, ConstraintKind.SAME_SIZE, ConstraintKind.ELEMENT_GROUP]
        assert g.kind_slice(ConstraintKind.ALIGNMENT) == slice(0, 1)
        assert g.kind_slice(ConstraintKind.MULTIMODAL_GROUP) == slice(3, 3)
