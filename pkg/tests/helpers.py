"""Shared test plumbing: independent brute-force extraction oracles, random
layout generation, and a finite-difference gradient checker.

The oracles here deliberately use different mechanics from the library
(pairwise graphs + BFS components, exhaustive subset enumeration) so they can
catch clustering bugs rather than mirror them.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np

from layoutgraph.extraction import ExtractionConfig
from layoutgraph.model import AlignmentKind, BBox, Element, Gui

# ---------------------------------------------------------------------------
# Brute-force oracles


def _components(n: int, linked) -> list[list[int]]:
    """BFS connected components over an explicit pairwise predicate."""
    seen = [False] * n
    out = []
    for s in range(n):
        if seen[s]:
            continue
        comp, q = [], deque([s])
        seen[s] = True
        while q:
            u = q.popleft()
            comp.append(u)
            for v in range(n):
                if not seen[v] and (linked(u, v) or linked(v, u)):
                    seen[v] = True
                    q.append(v)
        out.append(sorted(comp))
    return out


def _median_round(values) -> int:
    s = sorted(values)
    n = len(s)
    m = s[n // 2] if n % 2 else (s[n // 2 - 1] + s[n // 2]) / 2.0
    return int(math.floor(m + 0.5))


def oracle_alignments(gui: Gui, cfg: ExtractionConfig) -> set[tuple]:
    """(kind, members, line) triples via pairwise-graph transitive closure."""
    out = set()
    els = gui.elements
    for akind in AlignmentKind:
        coords = [akind.coord(e.bbox) for e in els]
        for comp in _components(len(els), lambda u, v: abs(coords[u] - coords[v]) <= cfg.tol):
            if len(comp) >= cfg.min_members:
                members = tuple(sorted(els[i].id for i in comp))
                out.add((akind.value, members, _median_round([coords[i] for i in comp])))
    return out


def oracle_same_size(gui: Gui, cfg: ExtractionConfig) -> set[tuple]:
    out = set()
    els = gui.elements
    for size_kind, dim in (("width", lambda e: e.bbox.w), ("height", lambda e: e.bbox.h)):
        dims = [float(dim(e)) for e in els]
        for comp in _components(len(els), lambda u, v: abs(dims[u] - dims[v]) <= cfg.tol):
            if len(comp) >= cfg.min_members:
                members = tuple(sorted(els[i].id for i in comp))
                out.add((size_kind, members, _median_round([dims[i] for i in comp])))
    return out


def _valid_run(subset: list[Element], cluster_sorted: list[Element], axis: str,
               cfg: ExtractionConfig) -> bool:
    """Subset must be a consecutive slice of the sorted cluster with gaps
    <= group_gap and gap deviation <= tol."""
    ids = [e.id for e in subset]
    pos = [i for i, e in enumerate(cluster_sorted) if e.id in ids]
    if pos != list(range(pos[0], pos[0] + len(pos))):
        return False
    run = cluster_sorted[pos[0]:pos[0] + len(pos)]
    if axis == "v":
        gaps = [run[i + 1].bbox.y - run[i].bbox.y2 for i in range(len(run) - 1)]
    else:
        gaps = [run[i + 1].bbox.x - run[i].bbox.x2 for i in range(len(run) - 1)]
    return all(g <= cfg.group_gap for g in gaps) and max(gaps) - min(gaps) <= cfg.tol


def oracle_groups(gui: Gui, cfg: ExtractionConfig) -> set[tuple]:
    """(axis, members) of maximal valid runs via exhaustive subset search."""
    out = set()
    by_kind: dict[str, list[Element]] = {}
    for e in gui.elements:
        by_kind.setdefault(e.kind, []).append(e)
    for els in by_kind.values():
        if len(els) < cfg.min_members:
            continue
        for axis in ("v", "h"):
            if axis == "v":
                ortho = [float(e.bbox.x) for e in els]
                sort_key = lambda e: (e.bbox.y, e.id)
            else:
                ortho = [float(e.bbox.y) for e in els]
                sort_key = lambda e: (e.bbox.x, e.id)
            for comp in _components(len(els), lambda u, v: abs(ortho[u] - ortho[v]) <= cfg.tol):
                cluster = sorted((els[i] for i in comp), key=sort_key)
                n = len(cluster)
                valid: list[frozenset] = []
                for mask in range(1, 1 << n):
                    subset = [cluster[i] for i in range(n) if mask >> i & 1]
                    if len(subset) < cfg.min_members:
                        continue
                    if _valid_run(subset, cluster, axis, cfg):
                        valid.append(frozenset(e.id for e in subset))
                for s in valid:
                    if not any(s < other for other in valid):
                        out.add((axis, tuple(sorted(s))))
    return out


def oracle_multimodal(gui: Gui, cfg: ExtractionConfig) -> set[tuple]:
    """Member tuples (rows and spans) of repeated mixed-kind horizontal rows."""
    els = list(gui.elements)
    tops = [float(e.bbox.y) for e in els]
    rows: list[list[Element]] = []
    for comp in _components(len(els), lambda u, v: abs(tops[u] - tops[v]) <= cfg.tol):
        line = sorted((els[i] for i in comp), key=lambda e: (e.bbox.x, e.id))
        run: list[Element] = []
        for e in line:
            if run and e.bbox.x - run[-1].bbox.x2 > cfg.group_gap:
                if len(run) >= 2:
                    rows.append(run)
                run = []
            run.append(e)
        if len(run) >= 2:
            rows.append(run)
    rows = [r for r in rows if 2 <= len(r) <= 4 and len({e.kind for e in r}) >= 2]

    def template(r):
        return tuple(e.kind for e in r)

    def match(a, b):
        if template(a) != template(b):
            return False
        for ea, eb in zip(a, b):
            if abs(ea.bbox.w - eb.bbox.w) > cfg.tol or abs(ea.bbox.h - eb.bbox.h) > cfg.tol:
                return False
            if abs((ea.bbox.x - a[0].bbox.x) - (eb.bbox.x - b[0].bbox.x)) > cfg.tol:
                return False
            if abs((ea.bbox.y - a[0].bbox.y) - (eb.bbox.y - b[0].bbox.y)) > cfg.tol:
                return False
        return True

    out = set()
    for comp in _components(len(rows), lambda u, v: match(rows[u], rows[v])):
        repeated = [rows[i] for i in comp]
        if len(repeated) < cfg.min_members:
            continue
        span = []
        for r in repeated:
            members = tuple(sorted(e.id for e in r))
            span.extend(members)
            out.add(members)
        out.add(tuple(sorted(span)))
    return out


# ---------------------------------------------------------------------------
# Random layouts


def random_layout(rng: np.random.Generator, n: int, canvas_w: int = 360,
                  canvas_h: int = 640, kinds=("Text", "Image", "Button", "ListItem"),
                  snap_prob: float = 0.6) -> Gui:
    """n placed elements; with probability snap_prob a coordinate reuses an
    earlier element's value, so constraints actually occur."""
    elements = []
    xs: list[int] = []
    ys: list[int] = []
    ws: list[int] = []
    hs: list[int] = []
    for i in range(n):
        w = int(rng.integers(16, 120)) if not (ws and rng.random() < snap_prob) \
            else ws[int(rng.integers(len(ws)))]
        h = int(rng.integers(12, 100)) if not (hs and rng.random() < snap_prob) \
            else hs[int(rng.integers(len(hs)))]
        x = int(rng.integers(0, canvas_w - w)) if not (xs and rng.random() < snap_prob) \
            else min(xs[int(rng.integers(len(xs)))], canvas_w - w)
        y = int(rng.integers(0, canvas_h - h)) if not (ys and rng.random() < snap_prob) \
            else min(ys[int(rng.integers(len(ys)))], canvas_h - h)
        kind = kinds[int(rng.integers(len(kinds)))]
        elements.append(Element(f"e{i}", kind, BBox(x, y, w, h)))
        xs.append(x)
        ys.append(y)
        ws.append(w)
        hs.append(h)
    return Gui(canvas_w, canvas_h, tuple(elements))


# ---------------------------------------------------------------------------
# Finite differences


def finite_difference(f, x: np.ndarray, h: float = 1e-3) -> np.ndarray:
    """Central-difference gradient of scalar f at x, elementwise."""
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gf[i] = (fp - fm) / (2.0 * h)
    return g


def fd_check(analytic: np.ndarray, numeric: np.ndarray, rel_tol: float = 1e-4,
             abs_floor: float = 1e-6) -> None:
    """Assert elementwise relative agreement, ignoring joint near-zeros."""
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), abs_floor)
    rel = np.abs(analytic - numeric) / denom
    mask = (np.abs(analytic) > abs_floor) | (np.abs(numeric) > abs_floor)
    if mask.any():
        worst = float(rel[mask].max())
        assert worst < rel_tol, f"finite-difference mismatch: worst rel err {worst:.3e}"
