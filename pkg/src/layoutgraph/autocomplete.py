"""Interactive autocompletion: target prediction, snap refinement with
confidence levels, and the single/group/all suggestion modes.

Refinement applies one snap pass repeatedly until the box stops moving, so
``refine`` is a projection: feeding its output back in reproduces the same
box, confidence and trace. Candidate snaps are ranked nearest-first (then by
probability, then id), which keeps the fixed point unique.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

from . import tensor as T
from .embeddings import (
    CorpusStats,
    FeatureProvider,
    HashedFeatureProvider,
    element_node_features,
    graph_features,
)
from .extraction import ExtractionConfig, extract_all
from .gnn import constraint_head, gnn_forward, graph_embedding, placement_head
from .model import (
    AlignmentKind,
    BBox,
    ConstraintKind,
    ConstraintNode,
    Element,
    Gui,
    LayoutGraph,
    ValidationError,
    build_graph,
)
from .params import ModelParams


class Confidence(str, Enum):
    HIGH = "high"
    MEDIUM = "medium"
    LOW = "low"

    @property
    def rank(self) -> int:
        return {"high": 2, "medium": 1, "low": 0}[self.value]


@dataclass(frozen=True)
class RefineConfig:
    sigma: float = 20.0        # snap radius, pixels (inclusive)
    prob_threshold: float = 0.5

    def __post_init__(self) -> None:
        if self.sigma < 0:
            raise ValidationError("sigma must be >= 0")
        if not (0.0 < self.prob_threshold < 1.0):
            raise ValidationError("prob_threshold must lie in (0, 1)")


@dataclass(frozen=True)
class Suggestion:
    element_id: str
    bbox: BBox
    confidence: Confidence
    satisfied_constraints: tuple[tuple[str, float], ...]
    refinements: tuple[str, ...]
    raw_pred: tuple[float, float, float, float]
    cold_start: bool = False

    @property
    def mean_probability(self) -> float:
        if not self.satisfied_constraints:
            return 0.0
        return sum(p for _, p in self.satisfied_constraints) / len(self.satisfied_constraints)

    def to_dict(self) -> dict:
        d = {
            "element_id": self.element_id,
            "bbox": self.bbox.to_dict(),
            "confidence": self.confidence.value,
            "constraints": [{"id": cid, "p": p} for cid, p in self.satisfied_constraints],
            "trace": list(self.refinements),
            "raw": {"x": self.raw_pred[0], "y": self.raw_pred[1],
                    "w": self.raw_pred[2], "h": self.raw_pred[3]},
        }
        if self.cold_start:
            d["cold_start"] = True
        return d


@dataclass
class TargetPrediction:
    raw_px: tuple[float, float, float, float]
    probs: list[float]
    constraints: list[ConstraintNode]
    cold_start: bool = False

    @property
    def mean_probability(self) -> float:
        return sum(self.probs) / len(self.probs) if self.probs else 0.0


def target_forward(gui: Gui, target: Element, tensors: dict[str, T.Tensor],
                   params: ModelParams, provider: FeatureProvider,
                   corpus_stats: CorpusStats,
                   graph: Optional[LayoutGraph] = None,
                   constraints: Optional[Sequence[ConstraintNode]] = None,
                   extraction: ExtractionConfig = ExtractionConfig(),
                   ) -> tuple[T.Tensor, Optional[T.Tensor], LayoutGraph]:
    """Placement and constraint-probability tensors for one unplaced target.

    Returns (raw normalized (1, 4), per-constraint probabilities (N, 1) or
    None when the partial GUI carries no constraints, graph). Differentiable
    when run under a tape with trainable tensors.
    """
    if graph is None:
        placed_gui = Gui(gui.canvas_w, gui.canvas_h, gui.placed, gui.topic)
        if constraints is None:
            constraints = extract_all(placed_gui, extraction)
        graph = build_graph(placed_gui, constraints)
    if graph.num_elements == 0:
        raise ValidationError("target_forward needs at least one placed element")
    ele_feats, cons_feats = graph_features(gui, graph, tensors, params.config.embedding,
                                           provider, corpus_stats)
    h_target = element_node_features(target, params.config.embedding, tensors,
                                     provider, corpus_stats, as_target=True)
    embs = gnn_forward(graph, ele_feats, cons_feats, tensors, params.config)
    h_g = graph_embedding(embs, tensors)
    raw = placement_head(h_target, h_g, tensors)
    if graph.num_constraints == 0:
        return raw, None, graph
    h_cons = T.concat([embs.by_kind[k] for k in
                       (ConstraintKind.ALIGNMENT, ConstraintKind.SAME_SIZE,
                        ConstraintKind.ELEMENT_GROUP, ConstraintKind.MULTIMODAL_GROUP)
                       if embs.by_kind.get(k) is not None], axis=0)
    probs = constraint_head(h_target, h_g, h_cons, tensors)
    return raw, probs, graph


# ---------------------------------------------------------------------------
# Snap refinement


@dataclass
class _Snap:
    slot: str            # "x" | "y" | "w" | "h"
    value: int
    distance: float
    constraint: ConstraintNode
    prob: float
    via_group: bool

    def describe(self) -> str:
        return (f"snap {self.slot}={self.value} via {self.constraint.id} "
                f"(dist {self.distance:.2f}, p {self.prob:.3f})")


def _ratio_pair(primary: str, value: int, ratio: float) -> int:
    """Derive the other dimension from a snapped one through the aspect ratio."""
    if primary == "w":
        return max(1, round(value / ratio))
    return max(1, round(value * ratio))


def _enforce_ratio_raw(w: float, h: float, ratio: float) -> tuple[int, int]:
    """Keep predicted area but force the declared ratio (for unsnapped boxes).

    A pair that already satisfies the derivation rule is left alone, which
    makes this a projection (re-applying it cannot drift).
    """
    wi, hi = round(w), round(h)
    if w == wi and h == hi and wi >= 1 and hi == max(1, round(wi / ratio)):
        return int(wi), int(hi)
    area = max(w, 1.0) * max(h, 1.0)
    ww = max(1, round(math.sqrt(area * ratio)))
    hh = max(1, round(ww / ratio))
    return ww, hh


def _clamp_box(x: float, y: float, w: int, h: int, canvas_w: int, canvas_h: int,
               ratio: float) -> tuple[int, int, int, int, bool]:
    """Translate into the canvas; shrink preserving ratio if still oversize.

    The shrunk size is the canonical (w, h = round(w / ratio)) pair, so boxes
    that already fit pass through untouched and re-clamping cannot drift.
    """
    changed = False
    if w > canvas_w or h > canvas_h:
        ww = min(w, canvas_w, max(1, math.floor(ratio * (canvas_h + 0.5))))
        while ww > 1 and max(1, round(ww / ratio)) > canvas_h:
            ww -= 1
        w = max(1, ww)
        h = max(1, min(canvas_h, round(w / ratio)))
        changed = True
    xi = int(min(max(round(x), 0), canvas_w - w))
    yi = int(min(max(round(y), 0), canvas_h - h))
    if xi != round(x) or yi != round(y):
        changed = True
    return xi, yi, int(w), int(h), changed


def _group_axis(members: list[BBox]) -> str:
    """'v' when member origins spread farther vertically than horizontally."""
    yr = max(b.y for b in members) - min(b.y for b in members)
    xr = max(b.x for b in members) - min(b.x for b in members)
    return "v" if yr >= xr else "h"


def _continuation_slots(starts: list[float]) -> list[float]:
    """Positions continuing the run's pitch: before, after, and internal holes.

    The base pitch is the smallest positive member gap, so a missing middle
    element (which doubles one gap) cannot inflate the estimate.
    """
    s = sorted(starts)
    pitches = [s[i + 1] - s[i] for i in range(len(s) - 1)]
    positive = [p for p in pitches if p > 0]
    if not positive:
        return []
    pitch = min(positive)
    slots = [s[0] - pitch, s[-1] + pitch]
    for i, gap in enumerate(pitches):
        if gap > 1.5 * pitch:
            slots.append(s[i] + pitch)
    return slots


class _WorkBox:
    """Mutable box state for one snap pass."""

    def __init__(self, x: float, y: float, w: float, h: float):
        self.x, self.y, self.w, self.h = x, y, w, h
        self.confirmed: dict[str, bool] = {"x": False, "y": False, "size": False}
        self.via_align: dict[str, bool] = {"x": False, "y": False, "size": False}
        self.snaps: list[_Snap] = []

    def coord(self, kind: AlignmentKind) -> float:
        if kind is AlignmentKind.LEFT:
            return self.x
        if kind is AlignmentKind.RIGHT:
            return self.x + self.w
        if kind is AlignmentKind.TOP:
            return self.y
        if kind is AlignmentKind.BOTTOM:
            return self.y + self.h
        if kind is AlignmentKind.VMID:
            return self.x + self.w / 2.0
        return self.y + self.h / 2.0


def _pass(raw: tuple[float, float, float, float], candidates: list[tuple[ConstraintNode, float]],
          members_of: dict[str, list[BBox]], target_kind_members: dict[str, list[BBox]],
          ratio: float, cfg: RefineConfig) -> _WorkBox:
    """One application of the snap rules of the refinement pipeline."""
    box = _WorkBox(*raw)
    sigma = cfg.sigma

    # 1. Same-size snap: one primary dimension, the other follows the ratio.
    size_cands: list[tuple[float, float, str, str, int, ConstraintNode, float]] = []
    for c, p in candidates:
        if c.kind is not ConstraintKind.SAME_SIZE:
            continue
        cur = box.w if c.size_kind == "width" else box.h
        dist = abs(cur - c.size_value)
        if dist <= sigma:
            slot = "w" if c.size_kind == "width" else "h"
            size_cands.append((dist, -p, c.id, slot, c.size_value, c, p))
    if size_cands:
        dist, negp, _cid, slot, value, c, p = min(size_cands)
        other = _ratio_pair(slot, value, ratio)
        if slot == "w":
            box.w, box.h = float(value), float(other)
        else:
            box.h, box.w = float(value), float(other)
        box.confirmed["size"] = True
        box.via_align["size"] = True
        box.snaps.append(_Snap(slot, value, dist, c, p, via_group=False))

    # 2. Alignment snaps, one per axis, nearest line first.
    for axis, kinds in (("x", (AlignmentKind.LEFT, AlignmentKind.RIGHT, AlignmentKind.VMID)),
                        ("y", (AlignmentKind.TOP, AlignmentKind.BOTTOM, AlignmentKind.HMID))):
        cands: list[tuple[float, float, str, float, ConstraintNode, float]] = []
        for c, p in candidates:
            if c.kind is not ConstraintKind.ALIGNMENT or c.align_kind not in kinds:
                continue
            dist = abs(box.coord(c.align_kind) - c.line)
            if dist > sigma:
                continue
            if c.align_kind is AlignmentKind.LEFT:
                pos = float(c.line)
            elif c.align_kind is AlignmentKind.RIGHT:
                pos = c.line - box.w
            elif c.align_kind is AlignmentKind.TOP:
                pos = float(c.line)
            elif c.align_kind is AlignmentKind.BOTTOM:
                pos = c.line - box.h
            elif c.align_kind is AlignmentKind.VMID:
                pos = c.line - box.w / 2.0
            else:
                pos = c.line - box.h / 2.0
            # Integer boxes cannot hit a midline when line - extent/2 is fractional.
            if pos != round(pos):
                continue
            cands.append((dist, -p, c.id, pos, c, p))
        if cands:
            dist, negp, _cid, pos, c, p = min(cands)
            if axis == "x":
                box.x = pos
            else:
                box.y = pos
            box.confirmed[axis] = True
            box.via_align[axis] = True
            box.snaps.append(_Snap(axis, int(pos), dist, c, p, via_group=False))

    high = box.confirmed["x"] and box.confirmed["y"] and box.confirmed["size"]

    # 3. Grouping regularities fill whatever alignment/size left unconfirmed.
    if not high:
        group_cands = sorted(
            ((c, p) for c, p in candidates
             if c.kind in (ConstraintKind.ELEMENT_GROUP, ConstraintKind.MULTIMODAL_GROUP)),
            key=lambda cp: (-cp[1], cp[0].id))
        for c, p in group_cands:
            stats_members = target_kind_members.get(c.id) or members_of.get(c.id)
            if not stats_members or len(stats_members) < 2:
                continue
            axis = _group_axis(members_of[c.id])
            if axis == "v":
                dim_slot, pos_slot, run_slot = "w", "x", "y"
                dim_avg = sum(b.w for b in stats_members) / len(stats_members)
                pos_avg = sum(b.x for b in stats_members) / len(stats_members)
                starts = [float(b.y) for b in stats_members]
            else:
                dim_slot, pos_slot, run_slot = "h", "y", "x"
                dim_avg = sum(b.h for b in stats_members) / len(stats_members)
                pos_avg = sum(b.y for b in stats_members) / len(stats_members)
                starts = [float(b.x) for b in stats_members]
            if not box.confirmed["size"]:
                cur = getattr(box, dim_slot)
                dist = abs(cur - dim_avg)
                if dist <= sigma:
                    value = max(1, round(dim_avg))
                    other = _ratio_pair(dim_slot, value, ratio)
                    if dim_slot == "w":
                        box.w, box.h = float(value), float(other)
                    else:
                        box.h, box.w = float(value), float(other)
                    box.confirmed["size"] = True
                    box.snaps.append(_Snap(dim_slot, value, dist, c, p, via_group=True))
            if not box.confirmed[pos_slot]:
                cur = getattr(box, pos_slot)
                dist = abs(cur - pos_avg)
                if dist <= sigma:
                    value = round(pos_avg)
                    setattr(box, pos_slot, float(value))
                    box.confirmed[pos_slot] = True
                    box.snaps.append(_Snap(pos_slot, value, dist, c, p, via_group=True))
            if not box.confirmed[run_slot] and len(starts) >= 2:
                slots = _continuation_slots(starts)
                cur = getattr(box, run_slot)
                options = sorted((abs(cur - s), s) for s in slots)
                if options and options[0][0] <= sigma:
                    dist, slot_pos = options[0]
                    value = round(slot_pos)
                    setattr(box, run_slot, float(value))
                    box.confirmed[run_slot] = True
                    box.snaps.append(_Snap(run_slot, value, dist, c, p, via_group=True))
    return box


def refine(raw: tuple[float, float, float, float], probs: Sequence[float],
           constraints: Sequence[ConstraintNode], gui: Gui, target: Element,
           cfg: RefineConfig = RefineConfig(),
           ) -> tuple[BBox, Confidence, tuple[str, ...], tuple[tuple[str, float], ...]]:
    """Snap a raw prediction against predicted constraints; assign confidence.

    High needs x, y and one dimension confirmed by alignment/same-size snaps;
    Medium lets grouping regularities fill the gaps; anything else keeps the
    raw prediction (ratio-enforced, clamped into the canvas) at Low.
    """
    if len(probs) != len(constraints):
        raise ValidationError("probabilities must align with the constraint list")
    ratio = target.aspect_ratio if target.aspect_ratio else 1.0
    placed = {e.id: e for e in gui.placed}
    candidates = [(c, float(p)) for c, p in zip(constraints, probs)
                  if p >= cfg.prob_threshold]
    members_of: dict[str, list[BBox]] = {}
    kind_members: dict[str, list[BBox]] = {}
    for c, _ in candidates:
        if c.kind in (ConstraintKind.ELEMENT_GROUP, ConstraintKind.MULTIMODAL_GROUP):
            boxes = [placed[m].bbox for m in c.members if m in placed]
            members_of[c.id] = boxes
            same_kind = [placed[m].bbox for m in c.members
                         if m in placed and placed[m].kind == target.kind]
            if len(same_kind) >= 2:
                kind_members[c.id] = same_kind

    state = raw
    box = _pass(state, candidates, members_of, kind_members, ratio, cfg)
    for _ in range(8):
        new_state = (box.x, box.y, box.w, box.h)
        if new_state == state:
            break
        state = new_state
        box = _pass(state, candidates, members_of, kind_members, ratio, cfg)

    confidence = Confidence.LOW
    trace: list[str] = []
    bbox: Optional[BBox] = None
    snaps: list[_Snap] = []
    if box.confirmed["x"] and box.confirmed["y"] and box.confirmed["size"]:
        via_align_only = (box.via_align["x"] and box.via_align["y"] and box.via_align["size"])
        xi, yi, wi, hi, clamped = _clamp_box(
            box.x, box.y, max(1, int(round(box.w))), max(1, int(round(box.h))),
            gui.canvas_w, gui.canvas_h, ratio)
        candidate_box = BBox(xi, yi, wi, hi)
        surviving = [s for s in box.snaps if _snap_holds(s, candidate_box)]
        ok = {"x": False, "y": False, "size": False}
        via = {"x": True, "y": True, "size": True}
        for s in surviving:
            slot = "size" if s.slot in ("w", "h") else s.slot
            ok[slot] = True
            via[slot] = via[slot] and not s.via_group
        if ok["x"] and ok["y"] and ok["size"]:
            confidence = Confidence.HIGH if via_align_only and all(
                via[k] for k in ok) else Confidence.MEDIUM
            bbox = candidate_box
            snaps = surviving
            trace = [s.describe() for s in surviving]
            if clamped:
                trace.append(f"clamp to canvas -> ({xi},{yi},{wi},{hi})")
    if bbox is None:
        # Low: keep the raw prediction, ratio-enforced and clamped into canvas.
        confidence = Confidence.LOW
        w_i, h_i = _enforce_ratio_raw(raw[2], raw[3], ratio)
        xi, yi, wi, hi, clamped = _clamp_box(raw[0], raw[1], w_i, h_i,
                                             gui.canvas_w, gui.canvas_h, ratio)
        bbox = BBox(xi, yi, wi, hi)
        trace = []
        if (wi, hi) != (round(raw[2]), round(raw[3])):
            trace.append(f"ratio-enforce w={wi} h={hi} (declared {ratio:.4f})")
        if clamped:
            trace.append(f"clamp to canvas -> ({xi},{yi},{wi},{hi})")
        snaps = []

    satisfied: list[tuple[str, float]] = []
    snapped_group_ids = {s.constraint.id for s in snaps if s.via_group}
    for c, p in candidates:
        if c.kind in (ConstraintKind.ALIGNMENT, ConstraintKind.SAME_SIZE):
            if c.satisfied_by(bbox, tol=0.0):
                satisfied.append((c.id, p))
        elif c.id in snapped_group_ids:
            satisfied.append((c.id, p))
    satisfied.sort()
    return bbox, confidence, tuple(trace), tuple(satisfied)


def _snap_holds(s: _Snap, bbox: BBox) -> bool:
    if s.slot == "x":
        c = s.constraint
        if c.kind is ConstraintKind.ALIGNMENT:
            return c.satisfied_by(bbox, tol=0.0)
        return bbox.x == s.value
    if s.slot == "y":
        c = s.constraint
        if c.kind is ConstraintKind.ALIGNMENT:
            return c.satisfied_by(bbox, tol=0.0)
        return bbox.y == s.value
    if s.slot == "w":
        return bbox.w == s.value
    return bbox.h == s.value


def cold_start_raw(gui: Gui, target: Element) -> tuple[float, float, float, float]:
    """Centered box with 10% of the canvas area at the declared ratio."""
    ratio = target.aspect_ratio or 1.0
    area = 0.10 * gui.canvas_w * gui.canvas_h
    w = math.sqrt(area * ratio)
    h = w / ratio
    return ((gui.canvas_w - w) / 2.0, (gui.canvas_h - h) / 2.0, w, h)


class Autocompleter:
    """Checkpointed suggestion engine; pure given (state, checkpoint)."""

    def __init__(self, params: ModelParams,
                 provider: Optional[FeatureProvider] = None,
                 corpus_stats: Optional[CorpusStats] = None,
                 refine_config: RefineConfig = RefineConfig(),
                 extraction: ExtractionConfig = ExtractionConfig()):
        self.params = params
        e = params.config.embedding
        self.provider = provider or HashedFeatureProvider(e.text_dim, e.appearance_dim)
        stats_meta = params.meta.get("corpus_stats")
        self.corpus_stats = corpus_stats or CorpusStats(dict(stats_meta) if stats_meta else {})
        self.refine_config = refine_config
        self.extraction = extraction
        self.tensors = params.tensors(trainable=False)

    # -- prediction --------------------------------------------------------

    def predict_target(self, gui: Gui, target: Element) -> TargetPrediction:
        """Raw pixel-space placement and per-constraint probabilities."""
        if not gui.placed:
            return TargetPrediction(cold_start_raw(gui, target), [], [], cold_start=True)
        placed_gui = Gui(gui.canvas_w, gui.canvas_h, gui.placed, gui.topic)
        constraints = extract_all(placed_gui, self.extraction)
        graph = build_graph(placed_gui, constraints)
        raw, probs, graph = target_forward(
            gui, target.unplace(), self.tensors, self.params, self.provider,
            self.corpus_stats, graph=graph)
        x, y, w, h = (float(v) for v in raw.data[0])
        raw_px = (x * gui.canvas_w, y * gui.canvas_h, w * gui.canvas_w, h * gui.canvas_h)
        plist = [float(v) for v in probs.data[:, 0]] if probs is not None else []
        return TargetPrediction(raw_px, plist, list(graph.constraints))

    def suggest(self, gui: Gui, target_id: str) -> Suggestion:
        """Predict + refine one specific unplaced element."""
        target = gui.element(target_id)
        if target.placed:
            raise ValidationError(f"element {target_id!r} is already placed")
        pred = self.predict_target(gui, target)
        bbox, confidence, trace, satisfied = refine(
            pred.raw_px, pred.probs, pred.constraints, gui, target, self.refine_config)
        return Suggestion(
            element_id=target.id, bbox=bbox, confidence=confidence,
            satisfied_constraints=satisfied, refinements=trace,
            raw_pred=pred.raw_px, cold_start=pred.cold_start)

    def _ranked(self, gui: Gui) -> list[tuple[Suggestion, float]]:
        out = []
        for el in gui.unplaced:
            pred = self.predict_target(gui, el)
            bbox, confidence, trace, satisfied = refine(
                pred.raw_px, pred.probs, pred.constraints, gui, el, self.refine_config)
            s = Suggestion(el.id, bbox, confidence, satisfied, trace, pred.raw_px,
                           pred.cold_start)
            out.append((s, pred.mean_probability))
        out.sort(key=lambda sp: (-sp[0].confidence.rank, -sp[1], sp[0].element_id))
        return out

    def suggest_one(self, gui: Gui) -> Suggestion:
        """Highest-confidence suggestion across the unplaced pool."""
        if not gui.unplaced:
            raise ValidationError("no unplaced elements to suggest")
        return self._ranked(gui)[0][0]

    def suggest_group(self, gui: Gui) -> list[Suggestion]:
        """Jointly place unplaced elements sharing one predicted group.

        Falls back to a singleton suggest_one when no group is shared by at
        least two pool elements above the probability threshold.
        """
        pool = gui.unplaced
        if not pool:
            raise ValidationError("no unplaced elements to suggest")
        votes: dict[str, list[tuple[str, float]]] = {}
        cons_by_id: dict[str, ConstraintNode] = {}
        preds: dict[str, TargetPrediction] = {}
        for el in pool:
            pred = self.predict_target(gui, el)
            preds[el.id] = pred
            for c, p in zip(pred.constraints, pred.probs):
                if c.kind in (ConstraintKind.ELEMENT_GROUP, ConstraintKind.MULTIMODAL_GROUP) \
                        and p >= self.refine_config.prob_threshold:
                    votes.setdefault(c.id, []).append((el.id, p))
                    cons_by_id[c.id] = c
        shared = {cid: v for cid, v in votes.items() if len(v) >= 2}
        if not shared:
            return [self.suggest_one(gui)]
        best_id = max(shared, key=lambda cid: (len(shared[cid]),
                                               sum(p for _, p in shared[cid]) / len(shared[cid]),
                                               cid))
        group = cons_by_id[best_id]
        placed = {e.id: e for e in gui.placed}
        boxes = [placed[m].bbox for m in group.members if m in placed]
        axis = _group_axis(boxes)
        member_ids = [eid for eid, _ in shared[best_id]]
        prob_of = dict(shared[best_id])
        # Joint snap: one shared dimension, successive continuation slots.
        if axis == "v":
            dim = round(sum(b.w for b in boxes) / len(boxes))
            pos = round(sum(b.x for b in boxes) / len(boxes))
            starts = sorted(float(b.y) for b in boxes)
        else:
            dim = round(sum(b.h for b in boxes) / len(boxes))
            pos = round(sum(b.y for b in boxes) / len(boxes))
            starts = sorted(float(b.x) for b in boxes)
        positive = [p for p in (starts[i + 1] - starts[i] for i in range(len(starts) - 1))
                    if p > 0]
        pitch = min(positive) if positive else (dim + 8.0)
        ordered = sorted(member_ids, key=lambda eid:
                         (preds[eid].raw_px[1 if axis == "v" else 0], eid))
        out: list[Suggestion] = []
        for k, eid in enumerate(ordered, start=1):
            el = gui.element(eid)
            ratio = el.aspect_ratio or 1.0
            run = round(starts[-1] + k * pitch)
            other = _ratio_pair("w" if axis == "v" else "h", max(1, dim), ratio)
            if axis == "v":
                x, y, w, h = pos, run, max(1, dim), other
            else:
                x, y, w, h = run, pos, other, max(1, dim)
            xi, yi, wi, hi, clamped = _clamp_box(float(x), float(y), w, h,
                                                 gui.canvas_w, gui.canvas_h, ratio)
            trace = [f"group-joint {group.id} slot {k} (p {prob_of[eid]:.3f})"]
            if clamped:
                trace.append(f"clamp to canvas -> ({xi},{yi},{wi},{hi})")
            out.append(Suggestion(
                element_id=eid, bbox=BBox(xi, yi, wi, hi), confidence=Confidence.MEDIUM,
                satisfied_constraints=((group.id, prob_of[eid]),),
                refinements=tuple(trace), raw_pred=preds[eid].raw_px))
        return out

    def suggest_all(self, gui: Gui) -> list[Suggestion]:
        """Greedy loop: best suggestion, tentatively accept, repeat until done."""
        working = gui
        out: list[Suggestion] = []
        while working.unplaced:
            s = self.suggest_one(working)
            out.append(s)
            working = accept(working, s.element_id, s.bbox)
        return out


def accept(gui: Gui, element_id: str, bbox: BBox) -> Gui:
    """Place an unplaced element; overlap is allowed, leaving the canvas is not."""
    el = gui.element(element_id)
    if el.placed:
        raise ValidationError(f"element {element_id!r} is already placed")
    if bbox.x < 0 or bbox.y < 0 or bbox.x2 > gui.canvas_w or bbox.y2 > gui.canvas_h:
        raise ValidationError(f"bbox {bbox} lies outside the canvas")
    return gui.with_element(el.place(bbox))
