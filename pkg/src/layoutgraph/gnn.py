"""Heterogeneous mean-aggregation message passing over the bipartite graph.

Each layer updates every node synchronously from the previous layer:
h'_v = relu(W_self . h_v + sum over neighbor kinds of W_neigh_kind . mean of
that kind's neighbors). Empty neighbor sets contribute a zero mean, so
isolated nodes stay well defined. Element updates keep distinct neighbor
weights per constraint kind; constraint updates keep distinct self/neighbor
weights per kind.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import tensor as T
from .model import CONSTRAINT_KIND_ORDER, ConstraintKind, LayoutGraph
from .params import (
    ModelConfig,
    cons_neigh_name,
    cons_self_name,
    ele_neigh_name,
    ele_self_name,
    readout_name,
)


@dataclass
class NodeEmbeddings:
    """Final per-node feature matrices; a kind maps to None when absent."""

    h_ele: T.Tensor
    by_kind: dict[ConstraintKind, Optional[T.Tensor]]

    def constraint_row(self, graph: LayoutGraph, index: int) -> T.Tensor:
        """Embedding row of the graph's ``index``-th constraint node."""
        kind = graph.constraints[index].kind
        offset = graph.kind_slice(kind).start
        return T.rows(self.by_kind[kind], index - offset, index - offset + 1)


def _kind_adjacency(graph: LayoutGraph, kind: ConstraintKind) -> Optional[np.ndarray]:
    sl = graph.kind_slice(kind)
    if sl.stop == sl.start:
        return None
    return graph.adjacency[:, sl].astype(np.float64)


def gnn_forward(graph: LayoutGraph, ele_feats: T.Tensor,
                cons_feats: dict[ConstraintKind, Optional[T.Tensor]],
                tensors: dict[str, T.Tensor], config: ModelConfig) -> NodeEmbeddings:
    """Run all message-passing layers; returns node_dim-wide embeddings."""
    d = config.node_dim
    if ele_feats.shape[1] != d:
        raise T.ShapeError(f"element feature width {ele_feats.shape[1]} != node_dim {d}")
    h_ele = ele_feats
    h_kind = dict(cons_feats)
    # Per-kind mean-aggregation operators, fixed for the whole forward pass.
    to_cons: dict[ConstraintKind, T.Tensor] = {}
    to_ele: dict[ConstraintKind, T.Tensor] = {}
    for kind in CONSTRAINT_KIND_ORDER:
        a = _kind_adjacency(graph, kind)
        if a is None:
            continue
        col_deg = a.sum(axis=0)
        to_cons[kind] = T.constant((a / col_deg).T)          # (N_k, M), rows sum to 1
        row_deg = a.sum(axis=1, keepdims=True)
        safe = np.where(row_deg > 0, row_deg, 1.0)
        to_ele[kind] = T.constant(a / safe)                  # (M, N_k), zero rows allowed

    for layer in range(config.gnn_layers):
        new_kind: dict[ConstraintKind, Optional[T.Tensor]] = {}
        for kind in CONSTRAINT_KIND_ORDER:
            h_c = h_kind.get(kind)
            if h_c is None:
                new_kind[kind] = None
                continue
            ele_mean = T.matmul(to_cons[kind], h_ele)
            new_kind[kind] = T.relu(T.add(
                T.matmul(h_c, tensors[cons_self_name(layer, kind)]),
                T.matmul(ele_mean, tensors[cons_neigh_name(layer, kind)]),
            ))
        acc = T.matmul(h_ele, tensors[ele_self_name(layer)])
        for kind in CONSTRAINT_KIND_ORDER:
            h_c = h_kind.get(kind)
            if h_c is None:
                continue
            cons_mean = T.matmul(to_ele[kind], h_c)
            acc = T.add(acc, T.matmul(cons_mean, tensors[ele_neigh_name(layer, kind)]))
        h_ele = T.relu(acc)
        h_kind = new_kind
    return NodeEmbeddings(h_ele=h_ele, by_kind=h_kind)


def graph_embedding(embs: NodeEmbeddings, tensors: dict[str, T.Tensor]) -> T.Tensor:
    """Weighted sum of per-kind averaged node embeddings; absent kinds contribute zero."""
    if embs.h_ele.shape[0] == 0:
        raise T.ShapeError("graph embedding needs at least one element node")
    h_g = T.matmul(T.mean_rows(embs.h_ele), tensors[readout_name(None)])
    for kind in CONSTRAINT_KIND_ORDER:
        h_c = embs.by_kind.get(kind)
        if h_c is None or h_c.shape[0] == 0:
            continue
        h_g = T.add(h_g, T.matmul(T.mean_rows(h_c), tensors[readout_name(kind)]))
    return h_g


def _mlp(x: T.Tensor, tensors: dict[str, T.Tensor], head: str, layers: int,
         final_sigmoid: bool = False) -> T.Tensor:
    h = x
    for i in range(1, layers + 1):
        h = T.add(T.matmul(h, tensors[f"head/{head}/w{i}"]), tensors[f"head/{head}/b{i}"])
        if i < layers:
            h = T.relu(h)
    return T.sigmoid(h) if final_sigmoid else h


def predict(embs: NodeEmbeddings, tensors: dict[str, T.Tensor]) -> T.Tensor:
    """Per-element reconstruction head: (M, node_dim) -> (M, 4) normalized boxes."""
    return _mlp(embs.h_ele, tensors, "recon", 3)


def placement_head(h_target: T.Tensor, h_graph: T.Tensor,
                   tensors: dict[str, T.Tensor]) -> T.Tensor:
    """(1, 4) normalized (x, y, w, h) for the target element."""
    return _mlp(T.concat([h_target, h_graph], axis=1), tensors, "place", 3)


def constraint_head(h_target: T.Tensor, h_graph: T.Tensor, h_cons: T.Tensor,
                    tensors: dict[str, T.Tensor]) -> T.Tensor:
    """(N, 1) membership probabilities for N stacked constraint embeddings."""
    n = h_cons.shape[0]
    ones = T.constant(np.ones((n, 1)))
    tiled_t = T.matmul(ones, h_target)
    tiled_g = T.matmul(ones, h_graph)
    return _mlp(T.concat([tiled_t, tiled_g, h_cons], axis=1), tensors, "constraint", 3,
                final_sigmoid=True)


def classifier_head(h_graph: T.Tensor, tensors: dict[str, T.Tensor]) -> T.Tensor:
    """Topic logits; softmax applied by callers/losses."""
    return _mlp(h_graph, tensors, "classify", 3)
