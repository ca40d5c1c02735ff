"""Infer alignment, same-size, grouping and multimodal constraints from a
placed layout.

Clustering is transitive: two coordinates within ``tol`` of each other link,
and clusters are the connected components of those links. This matches how a
shared grid line is perceived, at the cost of occasionally merging two lines
up to 2*tol apart. Constraint ids are deterministic functions of
(kind, sorted member ids), so extraction is permutation-invariant and
idempotent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .model import (
    AlignmentKind,
    ConstraintKind,
    ConstraintNode,
    Element,
    Gui,
    ValidationError,
)


@dataclass(frozen=True)
class ExtractionConfig:
    tol: int = 2           # geometric tolerance, pixels
    group_gap: int = 32    # max whitespace inside a group run, pixels
    min_members: int = 2

    def __post_init__(self) -> None:
        if self.tol < 0 or self.group_gap < 0 or self.min_members < 2:
            raise ValidationError("tol/group_gap must be >= 0 and min_members >= 2")


def _require_placed(gui: Gui) -> tuple[Element, ...]:
    for e in gui.elements:
        if not e.placed:
            raise ValidationError(f"element {e.id!r} is unplaced; extraction needs a full layout")
    return gui.elements


def round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def _clusters_1d(values: Sequence[float], tol: float) -> list[list[int]]:
    """Connected components of the 'within tol' relation on a 1-D point set."""
    order = sorted(range(len(values)), key=lambda i: (values[i], i))
    clusters: list[list[int]] = []
    for i in order:
        if clusters and values[i] - values[clusters[-1][-1]] <= tol:
            clusters[-1].append(i)
        else:
            clusters.append([i])
    return clusters


def _align_id(kind: AlignmentKind, members: Iterable[str]) -> str:
    return f"align:{kind.value}:" + "+".join(sorted(members))


def extract_alignments(gui: Gui, config: ExtractionConfig = ExtractionConfig()) -> list[ConstraintNode]:
    """Cluster each of the six alignment coordinates; one constraint per cluster.

    The line is the rounded median of the member coordinates, so every member
    sits within tol of it.
    """
    elements = _require_placed(gui)
    out: list[ConstraintNode] = []
    for akind in AlignmentKind:
        coords = [akind.coord(e.bbox) for e in elements]
        for cluster in _clusters_1d(coords, config.tol):
            if len(cluster) < config.min_members:
                continue
            members = [elements[i].id for i in cluster]
            line = round_half_up(_median([coords[i] for i in cluster]))
            out.append(ConstraintNode(
                id=_align_id(akind, members),
                kind=ConstraintKind.ALIGNMENT,
                members=tuple(sorted(members)),
                align_kind=akind,
                line=line,
            ))
    out.sort(key=lambda c: c.id)
    return out


def _median(values: Sequence[float]) -> float:
    s = sorted(values)
    n = len(s)
    mid = n // 2
    return s[mid] if n % 2 else (s[mid - 1] + s[mid]) / 2.0


def extract_same_size(gui: Gui, config: ExtractionConfig = ExtractionConfig()) -> list[ConstraintNode]:
    """Cluster widths and heights separately; one same-size node per cluster."""
    elements = _require_placed(gui)
    out: list[ConstraintNode] = []
    for size_kind, getter in (("width", lambda e: e.bbox.w), ("height", lambda e: e.bbox.h)):
        dims = [float(getter(e)) for e in elements]
        for cluster in _clusters_1d(dims, config.tol):
            if len(cluster) < config.min_members:
                continue
            members = sorted(elements[i].id for i in cluster)
            value = round_half_up(_median([dims[i] for i in cluster]))
            out.append(ConstraintNode(
                id=f"size:{size_kind}:" + "+".join(members),
                kind=ConstraintKind.SAME_SIZE,
                members=tuple(members),
                size_kind=size_kind,
                size_value=value,
            ))
    out.sort(key=lambda c: c.id)
    return out


def _run_windows(positions: list[tuple[float, float, str]], group_gap: int, tol: int,
                 min_members: int) -> list[list[str]]:
    """Maximal windows over (start, extent, id) sorted by start.

    A window is valid when successive whitespace gaps are all <= group_gap
    and the gaps are near-equidistant (max - min <= tol). Returns maximal
    valid windows of length >= min_members.
    """
    positions = sorted(positions, key=lambda t: (t[0], t[2]))
    n = len(positions)
    valid: list[tuple[int, int]] = []
    for i in range(n):
        for j in range(i + min_members - 1, n):
            gaps = [positions[k + 1][0] - (positions[k][0] + positions[k][1]) for k in range(i, j)]
            if all(g <= group_gap for g in gaps) and max(gaps) - min(gaps) <= tol:
                valid.append((i, j))
    maximal = [(i, j) for (i, j) in valid
               if not any((a <= i and j <= b and (a, b) != (i, j)) for (a, b) in valid)]
    return [[positions[k][2] for k in range(i, j + 1)] for (i, j) in maximal]


def extract_groups(gui: Gui, config: ExtractionConfig = ExtractionConfig()) -> list[ConstraintNode]:
    """Same-kind vertical or horizontal runs with regular spacing.

    Elements must agree on the orthogonal axis within tol (left edges for
    vertical runs, top edges for horizontal ones).
    """
    elements = _require_placed(gui)
    out: list[ConstraintNode] = []
    by_kind: dict[str, list[Element]] = {}
    for e in elements:
        by_kind.setdefault(e.kind, []).append(e)
    for kind_elements in by_kind.values():
        if len(kind_elements) < config.min_members:
            continue
        # Vertical runs: cluster on x (left edge), scan down y.
        for axis, ortho_coord, start_coord, extent in (
            ("v", lambda e: float(e.bbox.x), lambda e: float(e.bbox.y), lambda e: float(e.bbox.h)),
            ("h", lambda e: float(e.bbox.y), lambda e: float(e.bbox.x), lambda e: float(e.bbox.w)),
        ):
            ortho = [ortho_coord(e) for e in kind_elements]
            for cluster in _clusters_1d(ortho, config.tol):
                if len(cluster) < config.min_members:
                    continue
                runs = _run_windows(
                    [(start_coord(kind_elements[i]), extent(kind_elements[i]), kind_elements[i].id)
                     for i in cluster],
                    config.group_gap, config.tol, config.min_members)
                for members in runs:
                    members = sorted(members)
                    out.append(ConstraintNode(
                        id=f"group:{axis}:" + "+".join(members),
                        kind=ConstraintKind.ELEMENT_GROUP,
                        members=tuple(members),
                    ))
    unique = {c.id: c for c in out}
    return sorted(unique.values(), key=lambda c: c.id)


MAX_TEMPLATE_LEN = 4


def _horizontal_rows(elements: Sequence[Element], config: ExtractionConfig) -> list[list[Element]]:
    """Maximal left-to-right runs of top-aligned elements with gaps <= group_gap."""
    rows: list[list[Element]] = []
    tops = [float(e.bbox.y) for e in elements]
    for cluster in _clusters_1d(tops, config.tol):
        line = sorted((elements[i] for i in cluster), key=lambda e: (e.bbox.x, e.id))
        run: list[Element] = []
        for e in line:
            if run and e.bbox.x - run[-1].bbox.x2 > config.group_gap:
                if len(run) >= 2:
                    rows.append(run)
                run = []
            run.append(e)
        if len(run) >= 2:
            rows.append(run)
    return rows


def _row_template(row: Sequence[Element]) -> tuple[str, ...]:
    return tuple(e.kind for e in row)


def _rows_match(a: Sequence[Element], b: Sequence[Element], tol: int) -> bool:
    """Same kind sequence with repeated geometry: matching sizes and intra-row offsets."""
    if _row_template(a) != _row_template(b):
        return False
    ax0, ay0 = a[0].bbox.x, a[0].bbox.y
    bx0, by0 = b[0].bbox.x, b[0].bbox.y
    for ea, eb in zip(a, b):
        if abs(ea.bbox.w - eb.bbox.w) > tol or abs(ea.bbox.h - eb.bbox.h) > tol:
            return False
        if abs((ea.bbox.x - ax0) - (eb.bbox.x - bx0)) > tol:
            return False
        if abs((ea.bbox.y - ay0) - (eb.bbox.y - by0)) > tol:
            return False
    return True


def extract_multimodal_groups(gui: Gui, config: ExtractionConfig = ExtractionConfig()) -> list[ConstraintNode]:
    """Repeated mixed-kind rows (e.g. Icon+Text) become multimodal groups.

    Each repetition set yields one node per row plus one spanning node
    linking every member of every repeated row. Templates longer than
    MAX_TEMPLATE_LEN are ignored.
    """
    _require_placed(gui)
    rows = [r for r in _horizontal_rows(gui.elements, config)
            if 2 <= len(r) <= MAX_TEMPLATE_LEN and len(set(_row_template(r))) >= 2]
    out: list[ConstraintNode] = []
    # Transitive match closure within each template bucket.
    buckets: dict[tuple[str, ...], list[list[Element]]] = {}
    for r in rows:
        buckets.setdefault(_row_template(r), []).append(r)
    for template_rows in buckets.values():
        n = len(template_rows)
        parent = list(range(n))

        def find(i: int) -> int:
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for i in range(n):
            for j in range(i + 1, n):
                if _rows_match(template_rows[i], template_rows[j], config.tol):
                    parent[find(i)] = find(j)
        groups: dict[int, list[list[Element]]] = {}
        for i in range(n):
            groups.setdefault(find(i), []).append(template_rows[i])
        for repeated in groups.values():
            if len(repeated) < config.min_members:
                continue
            span: list[str] = []
            for row in repeated:
                members = sorted(e.id for e in row)
                span.extend(members)
                out.append(ConstraintNode(
                    id="mgroup:" + "+".join(members),
                    kind=ConstraintKind.MULTIMODAL_GROUP,
                    members=tuple(members),
                ))
            out.append(ConstraintNode(
                id="mgroup:" + "+".join(sorted(span)),
                kind=ConstraintKind.MULTIMODAL_GROUP,
                members=tuple(sorted(span)),
            ))
    unique = {c.id: c for c in out}
    return sorted(unique.values(), key=lambda c: c.id)


def extract_all(gui: Gui, config: ExtractionConfig = ExtractionConfig()) -> list[ConstraintNode]:
    """Union of the four extractors, deterministically ordered by id."""
    out = (
        extract_alignments(gui, config)
        + extract_same_size(gui, config)
        + extract_groups(gui, config)
        + extract_multimodal_groups(gui, config)
    )
    out.sort(key=lambda c: (c.kind.value, c.id))
    return out
