"""Element and constraint attribute vectors.

Position and size use trainable per-coordinate lookup tables; element type is
a one-hot through a trainable matrix; text and appearance come from a
pluggable FeatureProvider (the default hashes tokens/bytes into buckets, so
the artifact needs no pretrained encoders — precomputed vectors supplied in
the GUI JSON are folded to the configured width). Everything funnels through
trainable projections into node_dim-wide node features.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

import numpy as np

from . import tensor as T
from .model import (
    BBox,
    ConstraintKind,
    ConstraintNode,
    DEFAULT_TYPE_VOCAB,
    Element,
    ValidationError,
)

UNK_TOKEN = "[UNK]"


@dataclass(frozen=True)
class EmbeddingConfig:
    coord_dim: int = 16
    node_dim: int = 256
    type_dim: int = 32
    text_dim: int = 64
    appearance_dim: int = 64
    unk_threshold: int = 3
    coord_max: int = 2560  # table rows = coord_max + 1 >= max(canvas_w, canvas_h)
    type_vocab: tuple[str, ...] = DEFAULT_TYPE_VOCAB

    def __post_init__(self) -> None:
        for name in ("coord_dim", "node_dim", "type_dim", "text_dim", "appearance_dim"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1")
        object.__setattr__(self, "type_vocab", tuple(self.type_vocab))

    @property
    def position_dim(self) -> int:
        return 4 * self.coord_dim

    @property
    def size_dim(self) -> int:
        return 2 * self.coord_dim

    @property
    def geometry_dim(self) -> int:
        return self.position_dim + self.size_dim

    @property
    def element_raw_dim(self) -> int:
        # geometry + appearance + text + type + aspect-ratio channel
        return self.geometry_dim + self.appearance_dim + self.text_dim + self.type_dim + 1

    def kind_index(self, kind: str) -> int:
        try:
            return self.type_vocab.index(kind)
        except ValueError:
            raise ValidationError(f"unknown element kind {kind!r}") from None

    def to_dict(self) -> dict:
        return {
            "coord_dim": self.coord_dim, "node_dim": self.node_dim,
            "type_dim": self.type_dim, "text_dim": self.text_dim,
            "appearance_dim": self.appearance_dim, "unk_threshold": self.unk_threshold,
            "coord_max": self.coord_max, "type_vocab": list(self.type_vocab),
        }

    @staticmethod
    def from_dict(d: dict) -> "EmbeddingConfig":
        return EmbeddingConfig(
            coord_dim=d["coord_dim"], node_dim=d["node_dim"], type_dim=d["type_dim"],
            text_dim=d["text_dim"], appearance_dim=d["appearance_dim"],
            unk_threshold=d["unk_threshold"], coord_max=d["coord_max"],
            type_vocab=tuple(d["type_vocab"]),
        )


class FeatureProvider(Protocol):
    """Pure mapping from element text/appearance to fixed-width vectors."""

    def text_vector(self, text: str) -> np.ndarray: ...

    def appearance_vector(self, appearance: Optional[Sequence[float]]) -> np.ndarray: ...


def _stable_hash(token: str) -> int:
    return int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "little")


class HashedFeatureProvider:
    """Deterministic hashed bag-of-tokens features; no model downloads needed."""

    def __init__(self, text_dim: int, appearance_dim: int):
        self.text_dim = text_dim
        self.appearance_dim = appearance_dim

    def text_vector(self, text: str) -> np.ndarray:
        out = np.zeros(self.text_dim)
        tokens = text.lower().split()
        if not tokens:
            return out
        for tok in tokens:
            h = _stable_hash(tok)
            bucket = h % self.text_dim
            sign = 1.0 if (h >> 63) & 1 == 0 else -1.0
            out[bucket] += sign
        return out / np.sqrt(len(tokens))

    def appearance_vector(self, appearance: Optional[Sequence[float]]) -> np.ndarray:
        """Fold an arbitrary-width feature vector into appearance_dim buckets."""
        out = np.zeros(self.appearance_dim)
        if appearance is None:
            return out
        vec = np.asarray(appearance, dtype=np.float64)
        if vec.size == self.appearance_dim:
            return vec.copy()
        for i in range(vec.size):
            out[i % self.appearance_dim] += vec[i]
        return out


@dataclass
class CorpusStats:
    """Per-string frequencies from a training split, for the UNK rule."""

    counts: dict[str, int] = field(default_factory=dict)

    def frequency(self, text: str) -> int:
        return self.counts.get(text, 0)

    @staticmethod
    def from_guis(guis) -> "CorpusStats":
        counts: dict[str, int] = {}
        for gui in guis:
            for el in gui.elements:
                if el.text is not None:
                    counts[el.text] = counts.get(el.text, 0) + 1
        return CorpusStats(counts)

    def to_json(self) -> bytes:
        return json.dumps(self.counts, sort_keys=True, separators=(",", ":"),
                          ensure_ascii=False).encode("utf-8")

    @staticmethod
    def from_json(data: bytes) -> "CorpusStats":
        return CorpusStats(json.loads(data.decode("utf-8")))


# -- parameter names used by this module -------------------------------------

P_POS_TABLE = "embed/pos_table"
P_SIZE_TABLE = "embed/size_table"
P_TYPE_MATRIX = "embed/type_matrix"
P_UNPLACED_TOKEN = "embed/unplaced_token"
P_ELEMENT_PROJ = "embed/element_proj"


def constraint_proj_name(kind: ConstraintKind) -> str:
    return f"embed/constraint_proj/{kind.value}"


def group_slot_name(kind: ConstraintKind) -> str:
    return f"embed/group_slot/{kind.value}"


def embed_position(bbox: BBox, pos_table: T.Tensor) -> T.Tensor:
    """Concatenated table rows for (x1, y1, x2, y2); width 4*coord_dim."""
    coords = (bbox.x, bbox.y, bbox.x2, bbox.y2)
    limit = pos_table.shape[0]
    for c in coords:
        if c < 0 or c >= limit:
            raise ValidationError(f"coordinate {c} outside table range [0, {limit - 1}]")
    return T.concat([T.lookup_row(pos_table, c) for c in coords], axis=1)


def embed_size(w: int, h: int, size_table: T.Tensor) -> T.Tensor:
    """Concatenated table rows for width and height; width 2*coord_dim."""
    limit = size_table.shape[0]
    for c in (w, h):
        if c < 1 or c >= limit:
            raise ValidationError(f"size {c} outside table range [1, {limit - 1}]")
    return T.concat([T.lookup_row(size_table, w), T.lookup_row(size_table, h)], axis=1)


def embed_type(kind: str, type_matrix: T.Tensor, config: EmbeddingConfig) -> T.Tensor:
    """One-hot through the type matrix (a row lookup)."""
    return T.lookup_row(type_matrix, config.kind_index(kind))


def embed_text(text: Optional[str], corpus_stats: CorpusStats,
               provider: FeatureProvider, unk_threshold: int) -> np.ndarray:
    """Provider vector, with rare strings mapped to the UNK vector.

    Absent text maps to the zero vector; strings seen fewer than
    ``unk_threshold`` times in the training split all share the UNK vector.
    """
    if text is None:
        return provider.text_vector("") * 0.0
    if corpus_stats.frequency(text) < unk_threshold:
        return provider.text_vector(UNK_TOKEN)
    return provider.text_vector(text)


def element_node_features(element: Element, config: EmbeddingConfig,
                          tensors: dict[str, T.Tensor], provider: FeatureProvider,
                          corpus_stats: CorpusStats, as_target: bool = False) -> T.Tensor:
    """Full element node feature row, projected to node_dim.

    Placed elements embed their geometry through the lookup tables; unplaced
    targets use the learned placeholder token instead, so stale bbox values
    can never leak into a target's features. The aspect-ratio channel is
    filled for both forms (from the bbox when placed).
    """
    if as_target or not element.placed:
        geometry = tensors[P_UNPLACED_TOKEN]
        ratio = element.aspect_ratio
    else:
        geometry = T.concat([
            embed_position(element.bbox, tensors[P_POS_TABLE]),
            embed_size(element.bbox.w, element.bbox.h, tensors[P_SIZE_TABLE]),
        ], axis=1)
        ratio = element.bbox.ratio
    parts = [
        geometry,
        T.constant(provider.appearance_vector(element.appearance).reshape(1, -1)),
        T.constant(embed_text(element.text, corpus_stats, provider,
                              config.unk_threshold).reshape(1, -1)),
        embed_type(element.kind, tensors[P_TYPE_MATRIX], config),
        T.constant([[float(ratio)]]),
    ]
    raw = T.concat(parts, axis=1)
    if raw.shape[1] != config.element_raw_dim:
        raise ValidationError(
            f"element feature width {raw.shape[1]} != configured {config.element_raw_dim}")
    return T.matmul(raw, tensors[P_ELEMENT_PROJ])


def constraint_attr_normalized(c: ConstraintNode, canvas_w: int, canvas_h: int) -> np.ndarray:
    """Raw attr with line/size values scaled by the canvas dimension."""
    v = c.attr()
    if c.kind is ConstraintKind.ALIGNMENT:
        v = v.copy()
        v[6] /= canvas_w
        v[7] /= canvas_h
    elif c.kind is ConstraintKind.SAME_SIZE:
        v = v / np.array([canvas_w, canvas_h])
    return v


def constraint_node_features(c: ConstraintNode, config: EmbeddingConfig,
                             tensors: dict[str, T.Tensor],
                             canvas_w: int, canvas_h: int) -> T.Tensor:
    """Per-kind attr vector through the per-kind projection to node_dim.

    Grouping kinds use a shared learned slot: group identity is carried by
    the graph edges, not by the attribute vector.
    """
    proj = tensors[constraint_proj_name(c.kind)]
    if c.kind in (ConstraintKind.ELEMENT_GROUP, ConstraintKind.MULTIMODAL_GROUP):
        return T.matmul(tensors[group_slot_name(c.kind)], proj)
    attr = constraint_attr_normalized(c, canvas_w, canvas_h).reshape(1, -1)
    return T.matmul(T.constant(attr), proj)


def graph_features(gui, graph, tensors: dict[str, T.Tensor], config: EmbeddingConfig,
                   provider: FeatureProvider, corpus_stats: CorpusStats,
                   ) -> tuple[T.Tensor, dict[ConstraintKind, Optional[T.Tensor]]]:
    """Stack node features for a whole graph: (M, node_dim) element matrix and
    one (N_kind, node_dim) matrix per constraint kind present."""
    by_id = {e.id: e for e in gui.elements}
    ele_rows = [
        element_node_features(by_id[eid], config, tensors, provider, corpus_stats)
        for eid in graph.element_ids
    ]
    ele_feats = T.concat(ele_rows, axis=0)
    cons_feats: dict[ConstraintKind, Optional[T.Tensor]] = {}
    for kind in ConstraintKind:
        sl = graph.kind_slice(kind)
        if sl.stop == sl.start:
            cons_feats[kind] = None
            continue
        rows = [constraint_node_features(graph.constraints[j], config, tensors,
                                         gui.canvas_w, gui.canvas_h)
                for j in range(sl.start, sl.stop)]
        cons_feats[kind] = T.concat(rows, axis=0)
    return ele_feats, cons_feats
