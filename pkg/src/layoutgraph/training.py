"""Deterministic training loops for the autocompletion and topic heads.

Same seed + same data = bit-identical checkpoints: parameter init draws in
sorted name order, sample order comes from a seeded permutation, and the
optimizer walks parameters in sorted order.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import tensor as T
from .autocomplete import target_forward
from .embeddings import CorpusStats, FeatureProvider, HashedFeatureProvider
from .extraction import ExtractionConfig, extract_all
from .metrics import PairSample, make_pairs
from .model import ConstraintKind, ConstraintNode, Gui, LayoutGraph, build_graph, gui_to_json
from .objective import LossReport, LossWeights, total_loss
from .params import ModelConfig, ModelParams
from .tasks import gui_embedding
from .gnn import classifier_head

CSV_HEADER = "step,total,mse,boundary,bce"


def corpus_hash(guis: Sequence[Gui]) -> str:
    h = hashlib.sha256()
    for g in guis:
        h.update(gui_to_json(g))
    return h.hexdigest()


def target_truth_flags(constraints: Sequence[ConstraintNode], partial: Gui,
                       target_placed, extraction: ExtractionConfig) -> np.ndarray:
    """Adjacency bits for the target against the partial GUI's constraints.

    A constraint counts as satisfied when re-extracting over the layout with
    the target placed at its true position yields a same-kind constraint
    covering the original members plus the target.
    """
    full = partial.add_element(target_placed)
    full_cons = extract_all(full, extraction)
    flags = np.zeros((len(constraints), 1))
    for j, c in enumerate(constraints):
        if c.kind in (ConstraintKind.ALIGNMENT, ConstraintKind.SAME_SIZE):
            if c.satisfied_by(target_placed.bbox, tol=extraction.tol):
                flags[j, 0] = 1.0
            continue
        members = set(c.members)
        for fc in full_cons:
            if fc.kind is c.kind and members <= set(fc.members) \
                    and target_placed.id in fc.members:
                flags[j, 0] = 1.0
                break
    return flags


@dataclass
class _PreparedPair:
    gui_ac: Gui
    target_unplaced: object
    truth_norm: np.ndarray  # (1, 4) in canvas units
    graph: LayoutGraph
    flags: np.ndarray       # (N, 1)


def _prepare(pair: PairSample, extraction: ExtractionConfig) -> _PreparedPair:
    gui_ac = pair.autocomplete_gui()
    partial = pair.partial
    constraints = extract_all(partial, extraction)
    graph = build_graph(partial, constraints)
    b = pair.target.bbox
    truth = np.array([[b.x / partial.canvas_w, b.y / partial.canvas_h,
                       b.w / partial.canvas_w, b.h / partial.canvas_h]])
    flags = target_truth_flags(graph.constraints, partial, pair.target, extraction)
    return _PreparedPair(gui_ac, pair.target.unplace(), truth, graph, flags)


def train_autocomplete(train_guis: Sequence[Gui], config: ModelConfig, seed: int,
                       epochs: int = 1, weights: LossWeights = LossWeights(),
                       lr: float = 1e-3, lr_decay: float = 1.0,
                       chunks_per_gui: int = 2,
                       extraction: ExtractionConfig = ExtractionConfig(),
                       provider: Optional[FeatureProvider] = None,
                       progress: Optional[Callable[[int, LossReport], None]] = None,
                       ) -> tuple[ModelParams, list[str], LossReport]:
    """Train placement + constraint heads end to end on partial-GUI pairs.

    ``lr_decay`` multiplies the learning rate after each epoch. Returns
    (params, CSV loss-log rows, final step's LossReport).
    """
    e = config.embedding
    provider = provider or HashedFeatureProvider(e.text_dim, e.appearance_dim)
    stats = CorpusStats.from_guis(train_guis)
    params = ModelParams.initialize(config, seed)
    params.meta.update({
        "task": "autocomplete",
        "train_seed": seed,
        "corpus_hash": corpus_hash(train_guis),
        "corpus_stats": stats.counts,
        "lambda": weights.lam,
        "eta": weights.eta,
    })
    prepared: list[_PreparedPair] = []
    for i, gui in enumerate(train_guis):
        for pair in make_pairs(gui, seed=(seed * 1_000_003 + i) % (2 ** 63),
                               chunks_per_gui=chunks_per_gui, extraction=extraction):
            prepared.append(_prepare(pair, extraction))
    if not prepared:
        raise ValueError("no training pairs produced")
    rng = np.random.default_rng(seed + 1)
    state = T.AdamState()
    rows = [CSV_HEADER]
    report: Optional[LossReport] = None
    step = 0
    epoch_lr = lr
    for epoch in range(epochs):
        for idx in rng.permutation(len(prepared)):
            p = prepared[int(idx)]
            with T.Tape() as tape:
                tensors = params.tensors()
                raw, probs, _ = target_forward(
                    p.gui_ac, p.target_unplaced, tensors, params, provider, stats,
                    graph=p.graph)
                flags = T.constant(p.flags) if probs is not None else None
                report = total_loss(raw, T.constant(p.truth_norm), probs, flags,
                                    canvas=(1.0, 1.0), weights=weights)
                tape.backward(report.total_tensor)
                grads = {}
                for name, t in tensors.items():
                    g = tape.grad(t)
                    if g is not None:
                        grads[name] = g
            T.adam_step(params.arrays, grads, state, lr=epoch_lr)
            step += 1
            rows.append(report.csv_row(step))
            if progress is not None:
                progress(step, report)
        epoch_lr *= lr_decay
    return params, rows, report


def train_classifier(labeled: Sequence[tuple[Gui, str]], config: ModelConfig, seed: int,
                     epochs: int = 3, lr: float = 1e-3,
                     extraction: ExtractionConfig = ExtractionConfig(),
                     provider: Optional[FeatureProvider] = None,
                     include_partials: bool = True,
                     jitter_augment: int = 0,
                     progress: Optional[Callable[[int, float], None]] = None,
                     ) -> tuple[ModelParams, list[str]]:
    """Train GNN + topic head on cross-entropy only.

    ``include_partials`` mirrors each GUI with a partial copy (a prefix in
    reading order), making the embedding robust to half-built layouts.
    ``jitter_augment`` > 0 perturbs each sample by up to that many pixels per
    step (re-extracting its constraints), which makes the learned embedding
    stable under pixel-level noise.
    """
    if not config.topics:
        raise ValueError("classifier training needs config.topics")
    e = config.embedding
    provider = provider or HashedFeatureProvider(e.text_dim, e.appearance_dim)
    guis = [g for g, _ in labeled]
    stats = CorpusStats.from_guis(guis)
    params = ModelParams.initialize(config, seed)
    params.meta.update({
        "task": "classify",
        "train_seed": seed,
        "corpus_hash": corpus_hash(guis),
        "corpus_stats": stats.counts,
        "topics": list(config.topics),
    })
    topic_index = {t: i for i, t in enumerate(config.topics)}
    rng = np.random.default_rng(seed + 2)
    samples: list[tuple[Gui, int]] = []
    for gui, label in labeled:
        if label not in topic_index:
            raise ValueError(f"label {label!r} not in configured topics")
        samples.append((gui, topic_index[label]))
        if include_partials and len(gui.elements) >= 3:
            n = len(gui.elements)
            keep = int(rng.integers(max(2, n // 3), n))
            ordered = sorted(gui.elements, key=lambda el: (el.bbox.y, el.bbox.x, el.id))
            kept_ids = {el.id for el in ordered[:keep]}
            partial = Gui(gui.canvas_w, gui.canvas_h,
                          tuple(el for el in gui.elements if el.id in kept_ids), gui.topic)
            samples.append((partial, topic_index[label]))
    # Graphs are static per sample unless augmenting; extract the clean ones once.
    graphs = [build_graph(g, extract_all(g, extraction)) for g, _ in samples]
    state = T.AdamState()
    rows = ["step,loss"]
    step = 0
    for _ in range(epochs):
        for idx in rng.permutation(len(samples)):
            gui, label = samples[int(idx)]
            graph = graphs[int(idx)]
            if jitter_augment > 0:
                from .synthetic import jitter_gui

                gui = jitter_gui(gui, rng, max_jitter=jitter_augment)
                graph = build_graph(gui, extract_all(gui, extraction))
            with T.Tape() as tape:
                tensors = params.tensors()
                h_g = gui_embedding(gui, tensors, params, provider, stats, graph=graph)
                logits = classifier_head(h_g, tensors)
                loss = T.cross_entropy(logits, [label])
                tape.backward(loss)
                grads = {}
                for name, t in tensors.items():
                    g = tape.grad(t)
                    if g is not None:
                        grads[name] = g
            T.adam_step(params.arrays, grads, state, lr=lr)
            step += 1
            rows.append(f"{step},{loss.item():.17g}")
            if progress is not None:
                progress(step, loss.item())
    return params, rows
