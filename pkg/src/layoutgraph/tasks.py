"""Downstream heads over the graph embedding: topic classification and
nearest-neighbor retrieval."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import tensor as T
from .embeddings import CorpusStats, FeatureProvider, HashedFeatureProvider, graph_features
from .extraction import ExtractionConfig, extract_all
from .gnn import classifier_head, gnn_forward, graph_embedding
from .model import Gui, LayoutGraph, ValidationError, build_graph
from .params import ModelParams


def gui_embedding(gui: Gui, tensors: dict[str, T.Tensor], params: ModelParams,
                  provider: FeatureProvider, corpus_stats: CorpusStats,
                  extraction: ExtractionConfig = ExtractionConfig(),
                  graph: Optional[LayoutGraph] = None) -> T.Tensor:
    """Whole-graph embedding h_G of a GUI's placed elements."""
    placed = Gui(gui.canvas_w, gui.canvas_h, gui.placed, gui.topic)
    if not placed.elements:
        raise ValidationError("graph embedding needs at least one placed element")
    if graph is None:
        graph = build_graph(placed, extract_all(placed, extraction))
    ele_feats, cons_feats = graph_features(placed, graph, tensors,
                                           params.config.embedding, provider, corpus_stats)
    embs = gnn_forward(graph, ele_feats, cons_feats, tensors, params.config)
    return graph_embedding(embs, tensors)


def _default_provider(params: ModelParams) -> FeatureProvider:
    e = params.config.embedding
    return HashedFeatureProvider(e.text_dim, e.appearance_dim)


def _stats(params: ModelParams, corpus_stats: Optional[CorpusStats]) -> CorpusStats:
    if corpus_stats is not None:
        return corpus_stats
    meta = params.meta.get("corpus_stats")
    return CorpusStats(dict(meta)) if meta else CorpusStats()


def classify(gui: Gui, params: ModelParams,
             provider: Optional[FeatureProvider] = None,
             corpus_stats: Optional[CorpusStats] = None,
             extraction: ExtractionConfig = ExtractionConfig(),
             allow_untrained: bool = False) -> tuple[str, np.ndarray]:
    """(topic label, probability vector over configured topics)."""
    topics = params.config.topics
    if not topics:
        raise ValidationError("checkpoint has no topic head configured")
    if not allow_untrained and params.meta.get("task") != "classify":
        raise ValidationError("checkpoint is not a trained topic classifier")
    provider = provider or _default_provider(params)
    tensors = params.tensors(trainable=False)
    h_g = gui_embedding(gui, tensors, params, provider, _stats(params, corpus_stats),
                        extraction)
    probs = T.softmax(classifier_head(h_g, tensors)).data[0]
    return topics[int(np.argmax(probs))], probs


@dataclass
class EmbeddingIndex:
    """Order-stable list of (gui id, h_G); distances Euclidean by default."""

    ids: list[str]
    vectors: np.ndarray  # (n, node_dim)
    params: ModelParams
    metric: str = "euclidean"

    def __post_init__(self) -> None:
        if self.vectors.shape[0] != len(self.ids):
            raise ValidationError("index vectors and ids disagree in length")


def build_index(guis: Sequence[Gui], params: ModelParams,
                ids: Optional[Sequence[str]] = None,
                provider: Optional[FeatureProvider] = None,
                corpus_stats: Optional[CorpusStats] = None,
                extraction: ExtractionConfig = ExtractionConfig(),
                metric: str = "euclidean") -> EmbeddingIndex:
    if ids is None:
        ids = [f"g{i:05d}" for i in range(len(guis))]
    if len(ids) != len(guis):
        raise ValidationError("ids must match the corpus length")
    provider = provider or _default_provider(params)
    stats = _stats(params, corpus_stats)
    tensors = params.tensors(trainable=False)
    rows = [gui_embedding(g, tensors, params, provider, stats, extraction).data[0]
            for g in guis]
    return EmbeddingIndex(list(ids), np.stack(rows, axis=0), params, metric)


def _distances(index: EmbeddingIndex, q: np.ndarray) -> np.ndarray:
    if index.metric == "cosine":
        qn = q / max(np.linalg.norm(q), 1e-12)
        vn = index.vectors / np.maximum(
            np.linalg.norm(index.vectors, axis=1, keepdims=True), 1e-12)
        return 1.0 - vn @ qn
    return np.linalg.norm(index.vectors - q[None, :], axis=1)


def retrieve(query: Gui, index: EmbeddingIndex, k: int,
             provider: Optional[FeatureProvider] = None,
             corpus_stats: Optional[CorpusStats] = None,
             extraction: ExtractionConfig = ExtractionConfig()) -> list[str]:
    """Top-k ids by ascending distance, ties by id; the query itself (any
    entry with a bit-identical embedding) is excluded."""
    params = index.params
    provider = provider or _default_provider(params)
    tensors = params.tensors(trainable=False)
    q = gui_embedding(query, tensors, params, provider, _stats(params, corpus_stats),
                      extraction).data[0]
    self_mask = np.all(index.vectors == q[None, :], axis=1)
    candidates = [(float(d), gid) for gid, d, is_self
                  in zip(index.ids, _distances(index, q), self_mask) if not is_self]
    if k > len(candidates):
        raise ValidationError(f"k={k} exceeds retrievable index size {len(candidates)}")
    candidates.sort()
    return [gid for _, gid in candidates[:k]]


INDEX_VECTORS_KEY = "index/vectors"


def save_index(path, index: EmbeddingIndex) -> None:
    """Index file = the model checkpoint plus the vector table and id list."""
    arrays = dict(index.params.arrays)
    arrays[INDEX_VECTORS_KEY] = index.vectors
    meta = dict(index.params.meta)
    meta["config"] = index.params.config.to_dict()
    meta["index_ids"] = index.ids
    meta["index_metric"] = index.metric
    T.save_checkpoint(path, arrays, meta)


def load_index(path) -> EmbeddingIndex:
    from .params import ModelConfig

    arrays, meta = T.load_checkpoint(path)
    vectors = arrays.pop(INDEX_VECTORS_KEY)
    ids = meta.pop("index_ids")
    metric = meta.pop("index_metric", "euclidean")
    config = ModelConfig.from_dict(meta.pop("config"))
    params = ModelParams(config, arrays, meta)
    return EmbeddingIndex(list(ids), vectors, params, metric)
