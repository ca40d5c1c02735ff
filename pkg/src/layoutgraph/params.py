"""All trainable arrays in one flat, serializable container.

Parameter names are stable strings, so checkpoints round-trip bit-exactly
and training stays deterministic (initialization draws happen in sorted name
order from one seeded generator).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import tensor as T
from .embeddings import (
    EmbeddingConfig,
    P_ELEMENT_PROJ,
    P_POS_TABLE,
    P_SIZE_TABLE,
    P_TYPE_MATRIX,
    P_UNPLACED_TOKEN,
    constraint_proj_name,
    group_slot_name,
)
from .model import CONSTRAINT_KIND_ORDER, ConstraintKind

ATTR_DIMS = {
    ConstraintKind.ALIGNMENT: 8,
    ConstraintKind.SAME_SIZE: 2,
    ConstraintKind.ELEMENT_GROUP: 8,
    ConstraintKind.MULTIMODAL_GROUP: 8,
}

CLASSIFIER_HIDDEN = (256, 64)


@dataclass(frozen=True)
class ModelConfig:
    embedding: EmbeddingConfig = EmbeddingConfig()
    gnn_layers: int = 2
    topics: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.gnn_layers < 1:
            raise ValueError("gnn_layers must be >= 1")
        object.__setattr__(self, "topics", tuple(self.topics))

    @property
    def node_dim(self) -> int:
        return self.embedding.node_dim

    def to_dict(self) -> dict:
        return {
            "embedding": self.embedding.to_dict(),
            "gnn_layers": self.gnn_layers,
            "topics": list(self.topics),
        }

    @staticmethod
    def from_dict(d: dict) -> "ModelConfig":
        return ModelConfig(
            embedding=EmbeddingConfig.from_dict(d["embedding"]),
            gnn_layers=d["gnn_layers"],
            topics=tuple(d.get("topics", ())),
        )


def ele_self_name(layer: int) -> str:
    return f"gnn/l{layer}/ele_self"


def ele_neigh_name(layer: int, kind: ConstraintKind) -> str:
    return f"gnn/l{layer}/ele_neigh/{kind.value}"


def cons_self_name(layer: int, kind: ConstraintKind) -> str:
    return f"gnn/l{layer}/cons_self/{kind.value}"


def cons_neigh_name(layer: int, kind: ConstraintKind) -> str:
    return f"gnn/l{layer}/cons_neigh/{kind.value}"


def readout_name(kind: Optional[ConstraintKind]) -> str:
    return "readout/ele" if kind is None else f"readout/{kind.value}"


def _head_names(head: str, dims: list[tuple[int, int]]) -> dict[str, tuple[int, int]]:
    out: dict[str, tuple[int, int]] = {}
    for i, (fan_in, fan_out) in enumerate(dims, start=1):
        out[f"head/{head}/w{i}"] = (fan_in, fan_out)
        out[f"head/{head}/b{i}"] = (1, fan_out)
    return out


def _sinusoidal_table(n_rows: int, dim: int) -> np.ndarray:
    """Smooth positional-encoding init so nearby coordinates start nearby.

    The shortest wavelength is capped at 64 px: pixel-scale jitter then moves
    an embedding only slightly, while layout-scale offsets still separate.
    """
    pos = np.arange(n_rows, dtype=np.float64)[:, None]
    half = (dim + 1) // 2
    max_freq = 2.0 * np.pi / 64.0
    min_freq = 2.0 * np.pi / (4.0 * max(n_rows, 2))
    steps = np.arange(half, dtype=np.float64) / max(half - 1, 1)
    freq = max_freq * (min_freq / max_freq) ** steps
    ang = pos * freq[None, :]
    table = np.zeros((n_rows, 2 * half))
    table[:, 0::2] = np.sin(ang)
    table[:, 1::2] = np.cos(ang)
    return 0.1 * table[:, :dim]


def parameter_shapes(config: ModelConfig) -> dict[str, tuple[int, int]]:
    e = config.embedding
    d = e.node_dim
    shapes: dict[str, tuple[int, int]] = {
        P_POS_TABLE: (e.coord_max + 1, e.coord_dim),
        P_SIZE_TABLE: (e.coord_max + 1, e.coord_dim),
        P_TYPE_MATRIX: (len(e.type_vocab), e.type_dim),
        P_UNPLACED_TOKEN: (1, e.geometry_dim),
        P_ELEMENT_PROJ: (e.element_raw_dim, d),
    }
    for kind in CONSTRAINT_KIND_ORDER:
        shapes[constraint_proj_name(kind)] = (ATTR_DIMS[kind], d)
        if kind in (ConstraintKind.ELEMENT_GROUP, ConstraintKind.MULTIMODAL_GROUP):
            shapes[group_slot_name(kind)] = (1, ATTR_DIMS[kind])
    for layer in range(config.gnn_layers):
        shapes[ele_self_name(layer)] = (d, d)
        for kind in CONSTRAINT_KIND_ORDER:
            shapes[ele_neigh_name(layer, kind)] = (d, d)
            shapes[cons_self_name(layer, kind)] = (d, d)
            shapes[cons_neigh_name(layer, kind)] = (d, d)
    shapes[readout_name(None)] = (d, d)
    for kind in CONSTRAINT_KIND_ORDER:
        shapes[readout_name(kind)] = (d, d)
    shapes.update(_head_names("recon", [(d, d), (d, d), (d, 4)]))
    shapes.update(_head_names("place", [(2 * d, d), (d, d), (d, 4)]))
    shapes.update(_head_names("constraint", [(3 * d, d), (d, d), (d, 1)]))
    if config.topics:
        h1, h2 = CLASSIFIER_HIDDEN
        shapes.update(_head_names("classify", [(d, h1), (h1, h2), (h2, len(config.topics))]))
    return shapes


@dataclass
class ModelParams:
    """Trainable arrays + the config they were built for."""

    config: ModelConfig
    arrays: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)

    @staticmethod
    def initialize(config: ModelConfig, seed: int) -> "ModelParams":
        rng = np.random.default_rng(seed)
        arrays: dict[str, np.ndarray] = {}
        for name, shape in sorted(parameter_shapes(config).items()):
            leaf = name.rsplit("/", 1)[-1]
            if name in (P_POS_TABLE, P_SIZE_TABLE):
                arrays[name] = _sinusoidal_table(*shape)
            elif name.startswith("embed/group_slot/"):
                arrays[name] = np.zeros(shape)  # zero-initialized learned slot
            elif name.startswith("head/") and leaf.startswith("b"):
                arrays[name] = np.zeros(shape)
            elif name == P_UNPLACED_TOKEN:
                arrays[name] = rng.normal(0.0, 0.1, size=shape)
            else:
                arrays[name] = rng.normal(0.0, 1.0 / np.sqrt(shape[0]), size=shape)
        return ModelParams(config, arrays, meta={"seed": seed})

    def tensors(self, trainable: bool = True) -> dict[str, T.Tensor]:
        return {name: T.Tensor(arr, requires_grad=trainable)
                for name, arr in self.arrays.items()}

    def save(self, path) -> None:
        meta = dict(self.meta)
        meta["config"] = self.config.to_dict()
        T.save_checkpoint(path, self.arrays, meta)

    @staticmethod
    def load(path) -> "ModelParams":
        arrays, meta = T.load_checkpoint(path)
        config = ModelConfig.from_dict(meta.pop("config"))
        return ModelParams(config, arrays, meta)
