"""Core value types: GUIs, elements, constraints and the bipartite layout graph.

All types are immutable after construction and safe to share across threads.
JSON (de)serialization uses a canonical form: sorted keys, no insignificant
whitespace, optional fields omitted when absent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

DEFAULT_TYPE_VOCAB: tuple[str, ...] = (
    "Text", "Image", "Icon", "Button", "TextField", "Checkbox",
    "RadioButton", "Switch", "Slider", "ListItem", "Card", "Toolbar",
    "NavBar", "Tab", "Ad", "Map", "WebView", "Background",
)


class ValidationError(ValueError):
    """A document or value violates a structural invariant."""


class ParseError(ValueError):
    """Input bytes are not well-formed JSON."""


@dataclass(frozen=True)
class BBox:
    """Integer-pixel bounding box; origin top-left, y grows downward."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self) -> None:
        for name in ("x", "y", "w", "h"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool):
                raise ValidationError(f"bbox field {name} must be an integer, got {v!r}")
        if self.w < 1 or self.h < 1:
            raise ValidationError(f"bbox width/height must be >= 1, got {self.w}x{self.h}")

    @property
    def x2(self) -> int:
        return self.x + self.w

    @property
    def y2(self) -> int:
        return self.y + self.h

    @property
    def ratio(self) -> float:
        return self.w / self.h

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "w": self.w, "h": self.h}


@dataclass(frozen=True)
class Element:
    """One GUI element; bbox is None while the element is still unplaced.

    Placed elements normalize ``aspect_ratio`` to exactly w/h; unplaced
    elements must declare a positive ratio so sizes stay deducible.
    """

    id: str
    kind: str
    bbox: Optional[BBox] = None
    text: Optional[str] = None
    appearance: Optional[tuple[float, ...]] = None
    aspect_ratio: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("element id must be non-empty")
        if self.bbox is None:
            if self.aspect_ratio is None or not (self.aspect_ratio > 0):
                raise ValidationError(
                    f"unplaced element {self.id!r} needs a positive aspect_ratio"
                )
        else:
            declared = self.aspect_ratio
            if declared is not None and not _ratio_consistent(self.bbox, declared):
                raise ValidationError(
                    f"element {self.id!r}: aspect_ratio {declared} inconsistent with "
                    f"bbox {self.bbox.w}x{self.bbox.h}"
                )
            object.__setattr__(self, "aspect_ratio", self.bbox.ratio)
        if self.appearance is not None:
            vec = tuple(float(v) for v in self.appearance)
            if not all(np.isfinite(vec)):
                raise ValidationError(f"element {self.id!r}: non-finite appearance vector")
            object.__setattr__(self, "appearance", vec)

    @property
    def placed(self) -> bool:
        return self.bbox is not None

    def place(self, bbox: BBox) -> "Element":
        return Element(self.id, self.kind, bbox, self.text, self.appearance, None)

    def unplace(self) -> "Element":
        ratio = self.bbox.ratio if self.bbox is not None else self.aspect_ratio
        return Element(self.id, self.kind, None, self.text, self.appearance, ratio)


def _ratio_consistent(bbox: BBox, ratio: float) -> bool:
    # Accept any declared ratio that reproduces the box within 1 px of rounding
    # (rounding may have happened on either dimension).
    if ratio <= 0:
        return False
    return abs(bbox.w - ratio * bbox.h) <= 1.5 or abs(bbox.h - bbox.w / ratio) <= 1.5


@dataclass(frozen=True)
class Gui:
    """A canvas with placed and unplaced elements."""

    canvas_w: int
    canvas_h: int
    elements: tuple[Element, ...] = ()
    topic: Optional[str] = None

    def __post_init__(self) -> None:
        if self.canvas_w < 1 or self.canvas_h < 1:
            raise ValidationError("canvas dimensions must be >= 1")
        object.__setattr__(self, "elements", tuple(self.elements))
        seen: set[str] = set()
        for el in self.elements:
            if el.id in seen:
                raise ValidationError(f"duplicate element id {el.id!r}")
            seen.add(el.id)

    @property
    def placed(self) -> tuple[Element, ...]:
        return tuple(e for e in self.elements if e.placed)

    @property
    def unplaced(self) -> tuple[Element, ...]:
        return tuple(e for e in self.elements if not e.placed)

    def element(self, elem_id: str) -> Element:
        for e in self.elements:
            if e.id == elem_id:
                return e
        raise KeyError(elem_id)

    def with_element(self, updated: Element) -> "Gui":
        if not any(e.id == updated.id for e in self.elements):
            raise KeyError(updated.id)
        els = tuple(updated if e.id == updated.id else e for e in self.elements)
        return Gui(self.canvas_w, self.canvas_h, els, self.topic)

    def add_element(self, el: Element) -> "Gui":
        return Gui(self.canvas_w, self.canvas_h, self.elements + (el,), self.topic)


class ConstraintKind(str, Enum):
    ALIGNMENT = "alignment"
    SAME_SIZE = "same_size"
    ELEMENT_GROUP = "element_group"
    MULTIMODAL_GROUP = "multimodal_group"


class AlignmentKind(str, Enum):
    """Six alignment families; Left/Right/VMid run along vertical lines."""

    LEFT = "left"
    TOP = "top"
    RIGHT = "right"
    BOTTOM = "bottom"
    VMID = "vmid"
    HMID = "hmid"

    @property
    def slot(self) -> int:
        return _ALIGN_ORDER.index(self)

    @property
    def vertical_line(self) -> bool:
        return self in (AlignmentKind.LEFT, AlignmentKind.RIGHT, AlignmentKind.VMID)

    def coord(self, bbox: BBox) -> float:
        """The coordinate of ``bbox`` this alignment compares against its line."""
        if self is AlignmentKind.LEFT:
            return float(bbox.x)
        if self is AlignmentKind.RIGHT:
            return float(bbox.x2)
        if self is AlignmentKind.TOP:
            return float(bbox.y)
        if self is AlignmentKind.BOTTOM:
            return float(bbox.y2)
        if self is AlignmentKind.VMID:
            return bbox.x + bbox.w / 2.0
        return bbox.y + bbox.h / 2.0


_ALIGN_ORDER = (
    AlignmentKind.LEFT, AlignmentKind.TOP, AlignmentKind.RIGHT,
    AlignmentKind.BOTTOM, AlignmentKind.VMID, AlignmentKind.HMID,
)

GROUP_ATTR_DIM = 8


@dataclass(frozen=True)
class ConstraintNode:
    """One layout constraint over >= 2 elements, with its attribute vector.

    Attribute widths are fixed per kind: alignment 8 (6 one-hot + 2 line),
    same-size 2, grouping kinds 8 (a learned embedding slot; zeros here —
    group identity is carried by graph edges, not by attributes).
    """

    id: str
    kind: ConstraintKind
    members: tuple[str, ...]
    align_kind: Optional[AlignmentKind] = None
    line: Optional[int] = None
    size_kind: Optional[str] = None  # "width" | "height"
    size_value: Optional[int] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "members", tuple(self.members))
        if len(set(self.members)) != len(self.members):
            raise ValidationError(f"constraint {self.id!r}: repeated member ids")
        if self.kind is ConstraintKind.ALIGNMENT:
            if self.align_kind is None or self.line is None:
                raise ValidationError(f"constraint {self.id!r}: alignment needs align_kind and line")
        elif self.kind is ConstraintKind.SAME_SIZE:
            if self.size_kind not in ("width", "height") or self.size_value is None:
                raise ValidationError(f"constraint {self.id!r}: same_size needs size_kind and size_value")

    def attr(self) -> np.ndarray:
        """Raw fixed-width attribute vector (pixel units, unnormalized)."""
        if self.kind is ConstraintKind.ALIGNMENT:
            v = np.zeros(8)
            v[self.align_kind.slot] = 1.0
            if self.align_kind.vertical_line:
                v[6] = float(self.line)
            else:
                v[7] = float(self.line)
            return v
        if self.kind is ConstraintKind.SAME_SIZE:
            if self.size_kind == "width":
                return np.array([float(self.size_value), 0.0])
            return np.array([0.0, float(self.size_value)])
        return np.zeros(GROUP_ATTR_DIM)

    def satisfied_by(self, bbox: BBox, tol: float = 0.0) -> bool:
        """Geometric check for alignment / same-size constraints on one box."""
        if self.kind is ConstraintKind.ALIGNMENT:
            return abs(self.align_kind.coord(bbox) - self.line) <= tol
        if self.kind is ConstraintKind.SAME_SIZE:
            dim = bbox.w if self.size_kind == "width" else bbox.h
            return abs(dim - self.size_value) <= tol
        raise ValueError(f"no pointwise geometric predicate for {self.kind}")

    def to_dict(self) -> dict:
        d: dict = {"id": self.id, "kind": self.kind.value, "members": list(self.members)}
        if self.kind is ConstraintKind.ALIGNMENT:
            d["align_kind"] = self.align_kind.value
            d["line"] = self.line
        elif self.kind is ConstraintKind.SAME_SIZE:
            d["size_kind"] = self.size_kind
            d["size_value"] = self.size_value
        return d


CONSTRAINT_KIND_ORDER = (
    ConstraintKind.ALIGNMENT, ConstraintKind.SAME_SIZE,
    ConstraintKind.ELEMENT_GROUP, ConstraintKind.MULTIMODAL_GROUP,
)


@dataclass(frozen=True)
class LayoutGraph:
    """Bipartite graph of element nodes and constraint nodes.

    ``adjacency[i, j]`` is True iff element ``element_ids[i]`` belongs to
    ``constraints[j]``. Constraints are stored grouped by kind in
    CONSTRAINT_KIND_ORDER so per-kind column slices are contiguous.
    """

    element_ids: tuple[str, ...]
    constraints: tuple[ConstraintNode, ...]
    adjacency: np.ndarray

    def __post_init__(self) -> None:
        adj = np.asarray(self.adjacency, dtype=bool)
        if adj.shape != (len(self.element_ids), len(self.constraints)):
            raise ValidationError(
                f"adjacency shape {adj.shape} does not match "
                f"{len(self.element_ids)}x{len(self.constraints)}"
            )
        adj.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)

    def kind_slice(self, kind: ConstraintKind) -> slice:
        start = 0
        for k in CONSTRAINT_KIND_ORDER:
            n = sum(1 for c in self.constraints if c.kind is k)
            if k is kind:
                return slice(start, start + n)
            start += n
        raise ValueError(kind)

    @property
    def num_elements(self) -> int:
        return len(self.element_ids)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)


def build_graph(gui: Gui, constraints: Sequence[ConstraintNode]) -> LayoutGraph:
    """Assemble the bipartite graph over the GUI's placed elements.

    Constraints with fewer than two members are dropped (a relationship
    among fewer than two elements is vacuous). Raises on member ids that
    are not placed elements of the GUI.
    """
    ids = tuple(e.id for e in gui.placed)
    index = {eid: i for i, eid in enumerate(ids)}
    kept: list[ConstraintNode] = []
    for c in constraints:
        for m in c.members:
            if m not in index:
                raise ValidationError(f"constraint {c.id!r} references unknown element {m!r}")
        if len(c.members) >= 2:
            kept.append(c)
    kept.sort(key=lambda c: (CONSTRAINT_KIND_ORDER.index(c.kind), c.id))
    adj = np.zeros((len(ids), len(kept)), dtype=bool)
    for j, c in enumerate(kept):
        for m in c.members:
            adj[index[m], j] = True
    return LayoutGraph(ids, tuple(kept), adj)


# ---------------------------------------------------------------------------
# JSON (de)serialization


def _canonical_bytes(doc: object) -> bytes:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def element_to_dict(e: Element) -> dict:
    d: dict = {"id": e.id, "kind": e.kind}
    if e.bbox is not None:
        d["bbox"] = e.bbox.to_dict()
    else:
        d["aspect_ratio"] = e.aspect_ratio
    if e.text is not None:
        d["text"] = e.text
    if e.appearance is not None:
        d["appearance"] = list(e.appearance)
    return d


def element_from_dict(raw: dict, type_vocab: Sequence[str] = DEFAULT_TYPE_VOCAB) -> Element:
    kind = raw.get("kind")
    if kind not in set(type_vocab):
        raise ValidationError(f"unknown element kind {kind!r}")
    bbox = None
    if raw.get("bbox") is not None:
        b = raw["bbox"]
        try:
            bbox = BBox(int(b["x"]), int(b["y"]), int(b["w"]), int(b["h"]))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed bbox for element {raw.get('id')!r}") from exc
    appearance = raw.get("appearance")
    return Element(
        id=str(raw.get("id", "")),
        kind=kind,
        bbox=bbox,
        text=raw.get("text"),
        appearance=tuple(appearance) if appearance is not None else None,
        aspect_ratio=raw.get("aspect_ratio"),
    )


def gui_to_dict(gui: Gui) -> dict:
    doc: dict = {
        "canvas": {"w": gui.canvas_w, "h": gui.canvas_h},
        "elements": [element_to_dict(e) for e in gui.elements],
    }
    if gui.topic is not None:
        doc["topic"] = gui.topic
    return doc


def gui_to_json(gui: Gui) -> bytes:
    """Canonical JSON bytes; parse(emit(g)) == g and equal GUIs emit equal bytes."""
    return _canonical_bytes(gui_to_dict(gui))


def gui_from_dict(doc: dict, type_vocab: Sequence[str] = DEFAULT_TYPE_VOCAB) -> Gui:
    try:
        canvas = doc["canvas"]
        canvas_w, canvas_h = int(canvas["w"]), int(canvas["h"])
        raw_elements = doc.get("elements", [])
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed GUI document: {exc}") from exc
    elements = tuple(element_from_dict(raw, type_vocab) for raw in raw_elements)
    return Gui(canvas_w, canvas_h, elements, doc.get("topic"))


def gui_from_json(data: bytes, type_vocab: Sequence[str] = DEFAULT_TYPE_VOCAB) -> Gui:
    try:
        doc = json.loads(data.decode("utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValidationError("top-level GUI document must be an object")
    return gui_from_dict(doc)


def constraint_to_dict(c: ConstraintNode) -> dict:
    return c.to_dict()


def constraint_from_dict(doc: dict) -> ConstraintNode:
    try:
        kind = ConstraintKind(doc["kind"])
    except (KeyError, ValueError) as exc:
        raise ValidationError(f"bad constraint kind: {exc}") from exc
    align_kind = AlignmentKind(doc["align_kind"]) if doc.get("align_kind") else None
    return ConstraintNode(
        id=str(doc.get("id", "")),
        kind=kind,
        members=tuple(doc.get("members", ())),
        align_kind=align_kind,
        line=doc.get("line"),
        size_kind=doc.get("size_kind"),
        size_value=doc.get("size_value"),
    )


def constraints_to_json(constraints: Sequence[ConstraintNode]) -> bytes:
    return _canonical_bytes([c.to_dict() for c in constraints])


def constraints_from_json(data: bytes) -> tuple[ConstraintNode, ...]:
    try:
        doc = json.loads(data.decode("utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, list):
        raise ValidationError("constraint document must be a JSON array")
    return tuple(constraint_from_dict(d) for d in doc)
