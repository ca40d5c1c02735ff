"""Placement-quality metrics, partial-GUI pair generation, k-fold splits and
the evaluation harness with its baselines.

All three metrics live in [0, 1] (lower is better). Pair generation keeps a
contiguous chunk in reading order and turns every removed element into one
(partial, target) sample, carrying the target's ground-truth alignments so
alignment error stays computable against the original layout.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .autocomplete import Autocompleter, Confidence, RefineConfig, refine
from .extraction import ExtractionConfig, extract_alignments, extract_all
from .model import (
    AlignmentKind,
    BBox,
    ConstraintKind,
    Element,
    Gui,
    ValidationError,
    gui_from_dict,
    gui_to_dict,
)

MIN_GUI_ELEMENTS = 4  # layouts with three or fewer elements are excluded


def pos_error(pred: BBox, truth: BBox, canvas_w: int, canvas_h: int) -> float:
    """Distance between predicted and true positions over the largest possible
    move, clipped into [0, 1]; a canvas-filling prediction degenerates to
    exact-match-or-one."""
    num = math.hypot(pred.x - truth.x, pred.y - truth.y)
    denom = math.hypot(max(canvas_w - pred.w, 0), max(canvas_h - pred.h, 0))
    if denom == 0.0:
        return 0.0 if (pred.x, pred.y) == (truth.x, truth.y) else 1.0
    return min(num / denom, 1.0)


def area_error(pred: BBox, truth: BBox) -> float:
    """Absolute area difference over the larger area; symmetric in arguments."""
    a, b = pred.w * pred.h, truth.w * truth.h
    return abs(a - b) / max(a, b)


def align_error(pred: BBox, truth_alignments: Sequence[tuple[AlignmentKind, int]],
                tol: float = 2.0) -> float:
    """Share of the target's ground-truth alignments the prediction misses.

    An empty truth set scores 0: an unconstrained target cannot be wrong
    about alignments.
    """
    if not truth_alignments:
        return 0.0
    hit = sum(1 for kind, line in truth_alignments
              if abs(kind.coord(pred) - line) <= tol)
    return 1.0 - hit / len(truth_alignments)


@dataclass(frozen=True)
class PairSample:
    """(partial GUI, held-out target) evaluation unit."""

    partial: Gui
    target: Element  # placed; geometry is the ground truth
    truth_alignments: tuple[tuple[AlignmentKind, int], ...] = ()

    def __post_init__(self) -> None:
        if not self.target.placed:
            raise ValidationError("pair target must retain its ground-truth bbox")
        if any(e.id == self.target.id for e in self.partial.elements):
            raise ValidationError("target must be absent from the partial GUI")

    def autocomplete_gui(self) -> Gui:
        """The partial GUI plus the target as an unplaced pool element."""
        return self.partial.add_element(self.target.unplace())

    def to_dict(self) -> dict:
        return {
            "partial": gui_to_dict(self.partial),
            "target": {
                "id": self.target.id, "kind": self.target.kind,
                "bbox": self.target.bbox.to_dict(),
                **({"text": self.target.text} if self.target.text is not None else {}),
            },
            "truth_alignments": [[k.value, line] for k, line in self.truth_alignments],
        }

    @staticmethod
    def from_dict(doc: dict) -> "PairSample":
        t = doc["target"]
        target = Element(t["id"], t["kind"],
                         BBox(t["bbox"]["x"], t["bbox"]["y"], t["bbox"]["w"], t["bbox"]["h"]),
                         t.get("text"))
        return PairSample(
            partial=gui_from_dict(doc["partial"]),
            target=target,
            truth_alignments=tuple((AlignmentKind(k), int(line))
                                   for k, line in doc.get("truth_alignments", ())),
        )


def pairs_to_json(pairs: Sequence[PairSample]) -> bytes:
    return json.dumps([p.to_dict() for p in pairs], sort_keys=True,
                      separators=(",", ":")).encode("utf-8")


def pairs_from_json(data: bytes) -> list[PairSample]:
    return [PairSample.from_dict(d) for d in json.loads(data.decode("utf-8"))]


def _reading_order(gui: Gui) -> list[Element]:
    return sorted(gui.elements, key=lambda e: (e.bbox.y, e.bbox.x, e.id))


def make_pairs(gui: Gui, seed: int, chunks_per_gui: int = 30,
               extraction: ExtractionConfig = ExtractionConfig(),
               uniform_subset: bool = False) -> list[PairSample]:
    """Each draw keeps a chunk of k ~ U[1, n-1] elements; every removed
    element becomes a target paired with that partial.

    The chunk is a contiguous run in reading order (top-to-bottom then
    left-to-right); ``uniform_subset`` switches to an arbitrary subset for
    sensitivity checks.
    """
    n = len(gui.elements)
    if n < MIN_GUI_ELEMENTS:
        raise ValidationError(f"GUI has {n} elements; pairs need >= {MIN_GUI_ELEMENTS}")
    if any(not e.placed for e in gui.elements):
        raise ValidationError("pair generation needs a fully placed GUI")
    ordered = _reading_order(gui)
    truth_by_target: dict[str, tuple[tuple[AlignmentKind, int], ...]] = {}
    for c in extract_alignments(gui, extraction):
        for m in c.members:
            truth_by_target.setdefault(m, ())
            truth_by_target[m] = truth_by_target[m] + ((c.align_kind, c.line),)
    rng = np.random.default_rng(seed)
    out: list[PairSample] = []
    for _ in range(chunks_per_gui):
        k = int(rng.integers(1, n))
        if uniform_subset:
            kept_idx = set(rng.choice(n, size=k, replace=False).tolist())
        else:
            start = int(rng.integers(0, n - k + 1))
            kept_idx = set(range(start, start + k))
        kept_ids = {ordered[i].id for i in kept_idx}
        partial = Gui(gui.canvas_w, gui.canvas_h,
                      tuple(e for e in gui.elements if e.id in kept_ids), gui.topic)
        for i in range(n):
            if i in kept_idx:
                continue
            target = ordered[i]
            out.append(PairSample(partial, target, truth_by_target.get(target.id, ())))
    return out


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: dict[str, int]

    def fold_ids(self, fold: int) -> list[str]:
        return sorted(i for i, f in self.assignments.items() if f == fold)


def kfold(ids: Sequence[str], k: int = 5, seed: int = 0) -> FoldPlan:
    """Seeded shuffle then round-robin; fold sizes differ by at most one."""
    if k > len(ids):
        raise ValidationError(f"k={k} exceeds dataset size {len(ids)}")
    rng = np.random.default_rng(seed)
    order = list(ids)
    rng.shuffle(order)
    return FoldPlan(k, {gid: i % k for i, gid in enumerate(order)})


# ---------------------------------------------------------------------------
# Evaluation harness


@dataclass
class PairOutcome:
    bucket: int  # number of pre-existing elements in the partial GUI
    pos: float
    area: float
    align: float
    confidence: Optional[Confidence] = None


@dataclass
class BucketStats:
    count: int = 0
    pos_error: float = 0.0
    area_error: float = 0.0
    align_error: float = 0.0


@dataclass
class MetricReport:
    buckets: dict[int, BucketStats] = field(default_factory=dict)
    overall: BucketStats = field(default_factory=BucketStats)
    mean_step_seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "overall": vars(self.overall),
            "buckets": {str(b): vars(s) for b, s in sorted(self.buckets.items())},
            "mean_step_seconds": self.mean_step_seconds,
        }


@dataclass
class EvaluationResult:
    report: MetricReport
    outcomes: list[PairOutcome]


Predictor = Callable[[PairSample], "tuple[BBox, Optional[Confidence]] | BBox"]


def evaluate(predict_fn: Predictor, pairs: Sequence[PairSample],
             align_tol: float = 2.0) -> EvaluationResult:
    """Run a predictor over pairs; report bucketed means and mean step time."""
    outcomes: list[PairOutcome] = []
    total_time = 0.0
    for pair in pairs:
        t0 = time.perf_counter()
        result = predict_fn(pair)
        total_time += time.perf_counter() - t0
        bbox, conf = result if isinstance(result, tuple) else (result, None)
        gui = pair.partial
        outcomes.append(PairOutcome(
            bucket=len(gui.elements),
            pos=pos_error(bbox, pair.target.bbox, gui.canvas_w, gui.canvas_h),
            area=area_error(bbox, pair.target.bbox),
            align=align_error(bbox, pair.truth_alignments, align_tol),
            confidence=conf,
        ))
    report = MetricReport()
    groups: dict[int, list[PairOutcome]] = {}
    for o in outcomes:
        groups.setdefault(o.bucket, []).append(o)
    for bucket in sorted(groups):
        rows = groups[bucket]
        report.buckets[bucket] = BucketStats(
            count=len(rows),
            pos_error=sum(r.pos for r in rows) / len(rows),
            area_error=sum(r.area for r in rows) / len(rows),
            align_error=sum(r.align for r in rows) / len(rows),
        )
    if outcomes:
        report.overall = BucketStats(
            count=len(outcomes),
            pos_error=sum(r.pos for r in outcomes) / len(outcomes),
            area_error=sum(r.area for r in outcomes) / len(outcomes),
            align_error=sum(r.align for r in outcomes) / len(outcomes),
        )
        report.mean_step_seconds = total_time / len(outcomes)
    return EvaluationResult(report, outcomes)


def truth_oracle_predictor() -> Predictor:
    """Returns the ground truth; the harness's own zero check."""
    return lambda pair: pair.target.bbox


def center_baseline_predictor() -> Predictor:
    """Canvas center, true aspect ratio, 10% of the canvas area."""

    def fn(pair: PairSample) -> BBox:
        gui = pair.partial
        ratio = pair.target.bbox.ratio
        w = max(1, round(math.sqrt(0.10 * gui.canvas_w * gui.canvas_h * ratio)))
        w = min(w, gui.canvas_w)
        h = max(1, min(round(w / ratio), gui.canvas_h))
        return BBox((gui.canvas_w - w) // 2, (gui.canvas_h - h) // 2, w, h)

    return fn


def model_predictor(ac: Autocompleter) -> Predictor:
    def fn(pair: PairSample) -> tuple[BBox, Optional[Confidence]]:
        s = ac.suggest(pair.autocomplete_gui(), pair.target.id)
        return s.bbox, s.confidence

    return fn


def truth_constraint_predictor(ac: Autocompleter) -> Predictor:
    """Upper-bound style predictor: the model's raw placement refined with
    ground-truth constraint memberships instead of predicted probabilities."""

    def fn(pair: PairSample) -> tuple[BBox, Optional[Confidence]]:
        gui = pair.autocomplete_gui()
        target = gui.element(pair.target.id)
        pred = ac.predict_target(gui, target)
        flags = []
        for c in pred.constraints:
            if c.kind in (ConstraintKind.ALIGNMENT, ConstraintKind.SAME_SIZE):
                sat = c.satisfied_by(pair.target.bbox, tol=ac.extraction.tol)
            else:
                sat = _group_truth(c, pair, ac.extraction)
            flags.append(1.0 if sat else 0.0)
        bbox, conf, _, _ = refine(pred.raw_px, flags, pred.constraints, gui, target,
                                  ac.refine_config)
        return bbox, conf

    return fn


def _group_truth(c, pair: PairSample, extraction: ExtractionConfig) -> bool:
    """Would the target join this group when placed at its true position?"""
    full = pair.partial.add_element(pair.target)
    for fc in extract_all(full, extraction):
        if fc.kind is c.kind and set(c.members) <= set(fc.members) \
                and pair.target.id in fc.members:
            return True
    return False
