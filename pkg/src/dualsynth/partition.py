"""Proposition-preserving partition of the domain, kept as a forest.

Roots are the cells of the initial axis grid (induced by every
proposition region's coordinates).  Each refinement round appends one
layer: solved leaves (winning or losing) get a single pass-through child
with the identical box, undecided leaves are split into ``m``
interior-disjoint children that inherit the parent's labels.  Region ids
are root-to-leaf index paths, so the whole history stays addressable.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from itertools import product

from dualsynth.geometry import Box, ControlSystem

logger = logging.getLogger(__name__)

RegionId = tuple[int, ...]


class PartitionError(ValueError):
    pass


class Status(str, Enum):
    WINNING = "winning"
    LOSING = "losing"
    MAYBE = "maybe"
    UNEXPLORED = "unexplored"


def format_region_id(rid: RegionId) -> str:
    return ".".join(str(i) for i in rid)


def parse_region_id(text: str) -> RegionId:
    return tuple(int(p) for p in text.split("."))


@dataclass
class Node:
    box: Box
    parent: RegionId | None
    children: list[RegionId] = field(default_factory=list)
    status: Status = Status.UNEXPLORED
    labels: frozenset[str] = frozenset()
    initial: bool = False


@dataclass
class PartitionForest:
    domain: Box
    nodes: dict[RegionId, Node]
    roots: list[RegionId]
    leaves: list[RegionId]          # current layer, sorted by path
    iteration: int = 0

    def box(self, rid: RegionId) -> Box:
        return self.nodes[rid].box

    def labels(self, rid: RegionId) -> frozenset[str]:
        return self.nodes[rid].labels

    def status(self, rid: RegionId) -> Status:
        return self.nodes[rid].status

    def set_status(self, rid: RegionId, status: Status) -> None:
        self.nodes[rid].status = status

    def initial_leaves(self) -> list[RegionId]:
        return [r for r in self.leaves if self.nodes[r].initial]

    def depth(self, rid: RegionId) -> int:
        return len(rid) - 1


def _axis_cuts(domain: Box, boxes) -> list[list[Fraction]]:
    cuts = []
    for d in range(domain.dim):
        coords = {domain.lower[d], domain.upper[d]}
        for b in boxes:
            for v in (b.lower[d], b.upper[d]):
                if domain.lower[d] < v < domain.upper[d]:
                    coords.add(v)
        cuts.append(sorted(coords))
    return cuts


def initial_partition(sys: ControlSystem) -> PartitionForest:
    """Coarsest box partition refining every proposition boundary.

    The grid induced by the proposition regions' axis coordinates is
    canonical and reproducible; each cell's label set is decided by exact
    containment.
    """
    regions = [box for _name, box in sys.proposition_regions]
    cuts = _axis_cuts(sys.domain, regions)
    axis_intervals = [list(zip(c, c[1:])) for c in cuts]
    nodes: dict[RegionId, Node] = {}
    roots: list[RegionId] = []
    for idx, cell in enumerate(product(*axis_intervals)):
        box = Box(tuple(lo for lo, _ in cell), tuple(hi for _, hi in cell))
        labels = set()
        for name, region in sys.proposition_regions:
            if region.contains_box(box):
                labels.add(name)
            elif region.overlaps_interior(box):
                raise PartitionError(
                    f"axis grid does not resolve proposition {name!r} on cell "
                    f"{box}; region boundaries must be axis-aligned")
        rid: RegionId = (idx,)
        nodes[rid] = Node(box=box, parent=None,
                          labels=frozenset(labels),
                          initial=box.overlaps_interior(sys.initial_set))
        roots.append(rid)
    forest = PartitionForest(domain=sys.domain, nodes=nodes, roots=roots,
                             leaves=sorted(roots))
    logger.debug("initial partition: %d leaves", len(roots))
    return forest


def _split_counts(box: Box, m: int) -> list[int]:
    """Per-axis slice counts with product m, longest effective side first."""
    if m < 1:
        raise PartitionError("split count must be >= 1")
    counts = [1] * box.dim
    factors = []
    k, p = m, 2
    while k > 1:
        while k % p == 0:
            factors.append(p)
            k //= p
        p += 1
    for f in sorted(factors, reverse=True):
        widths = box.widths()
        axis = max(range(box.dim),
                   key=lambda d: (Fraction(widths[d], counts[d]), -d))
        if widths[axis] == 0:
            raise PartitionError(f"cannot split degenerate box {box} into {m}")
        counts[axis] *= f
    return counts


def split_box(box: Box, m: int) -> list[Box]:
    """m interior-disjoint equal-volume sub-boxes covering ``box``."""
    counts = _split_counts(box, m)
    axis_slices = []
    for d, k in enumerate(counts):
        lo, hi = box.lower[d], box.upper[d]
        step = (hi - lo) / k
        axis_slices.append([(lo + i * step, lo + (i + 1) * step)
                            for i in range(k)])
    return [Box(tuple(lo for lo, _ in cell), tuple(hi for _, hi in cell))
            for cell in product(*axis_slices)]


def split(forest: PartitionForest, region: RegionId, m: int) -> list[RegionId]:
    """Split a Maybe leaf into m children; returns child ids in order."""
    node = forest.nodes[region]
    if region not in forest.leaves:
        raise PartitionError(f"{format_region_id(region)} is not a leaf")
    if node.status in (Status.WINNING, Status.LOSING):
        raise PartitionError(
            f"refusing to split solved leaf {format_region_id(region)}")
    child_boxes = split_box(node.box, m)
    child_ids = []
    for j, cbox in enumerate(child_boxes, start=1):
        cid = region + (j,)
        forest.nodes[cid] = Node(box=cbox, parent=region, labels=node.labels,
                                 initial=False)
        node.children.append(cid)
        child_ids.append(cid)
    return child_ids


def advance_iteration(forest: PartitionForest,
                      winning: set[RegionId],
                      losing: set[RegionId],
                      maybe: set[RegionId],
                      m: int,
                      min_cell: Fraction | float = 0,
                      initial_set: Box | None = None) -> PartitionForest:
    """Produce the next layer: pass-through solved leaves, split Maybe ones.

    Maybe leaves whose children would fall below ``min_cell`` get a single
    pass-through child instead (still Maybe); the engine detects the
    no-progress case.  Initial flags are recomputed on the new leaves.
    """
    current = set(forest.leaves)
    if winning | losing | maybe != current or \
            (winning & losing) or (winning & maybe) or (losing & maybe):
        raise PartitionError("winning/losing/maybe must partition the leaves")
    min_cell = Fraction(min_cell) if not isinstance(min_cell, Fraction) else min_cell
    new_leaves: list[RegionId] = []
    for rid in forest.leaves:
        node = forest.nodes[rid]
        if rid in winning or rid in losing:
            status = Status.WINNING if rid in winning else Status.LOSING
            node.status = status
            cid = rid + (1,)
            forest.nodes[cid] = Node(box=node.box, parent=rid,
                                     labels=node.labels, status=status)
            node.children.append(cid)
            new_leaves.append(cid)
        else:
            node.status = Status.MAYBE
            counts = _split_counts(node.box, m)
            widths = node.box.widths()
            too_small = any(Fraction(widths[d], counts[d]) < min_cell
                            for d in range(node.box.dim) if counts[d] > 1)
            if too_small:
                cid = rid + (1,)
                forest.nodes[cid] = Node(box=node.box, parent=rid,
                                         labels=node.labels,
                                         status=Status.UNEXPLORED)
                node.children.append(cid)
                new_leaves.append(cid)
            else:
                new_leaves.extend(split(forest, rid, m))
    forest.leaves = sorted(new_leaves)
    forest.iteration += 1
    for rid in forest.leaves:
        node = forest.nodes[rid]
        if initial_set is not None:
            node.initial = node.box.overlaps_interior(initial_set)
        else:
            node.initial = forest.nodes[node.parent].initial
    logger.debug("iteration %d: %d leaves", forest.iteration, len(forest.leaves))
    return forest


def locate(forest: PartitionForest, point) -> RegionId:
    """The unique current leaf containing the point.

    Boundary ties resolve to the lexicographically smallest region path,
    which the sorted scan below yields for free.
    """
    pt = tuple(Fraction(v) if not isinstance(v, Fraction) else v for v in point)
    if not forest.domain.contains(pt):
        raise PartitionError(f"point {point} lies outside the domain")
    root = next((r for r in sorted(forest.roots)
                 if forest.nodes[r].box.contains(pt)), None)
    assert root is not None, "roots tile the domain"
    rid = root
    while forest.nodes[rid].children:
        rid = next(c for c in forest.nodes[rid].children
                   if forest.nodes[c].box.contains(pt))
    return rid


# ---------------------------------------------------------------------------
# exports
# ---------------------------------------------------------------------------

_STATUS_COLORS = {
    Status.WINNING: "#2ca02c",
    Status.MAYBE: "#ffd92f",
    Status.LOSING: "#d62728",
    Status.UNEXPLORED: "#c7c7c7",
}


def partition_to_json(forest: PartitionForest) -> list[dict]:
    out = []
    for rid in forest.leaves:
        node = forest.nodes[rid]
        out.append({
            "region_id": format_region_id(rid),
            "box": node.box.as_float_bounds(),
            "status": node.status.value,
            "labels": sorted(node.labels),
        })
    return out


def render_svg(domain: Box, rows, width: int = 480) -> str:
    """SVG of labeled status boxes; ``rows`` holds (id, Box, Status, labels)."""
    if domain.dim != 2:
        raise PartitionError("SVG export is only available for 2-D domains")
    (x0, y0), (x1, y1) = domain.lower, domain.upper
    w = float(x1 - x0)
    h = float(y1 - y0)
    scale = width / w
    height = h * scale
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height:.1f}" viewBox="0 0 {width} {height:.1f}">'
    ]
    for rid, box, status, labels in rows:
        bx0 = (float(box.lower[0]) - float(x0)) * scale
        bw = float(box.upper[0] - box.lower[0]) * scale
        bh = float(box.upper[1] - box.lower[1]) * scale
        # flip y so the origin sits bottom-left
        by0 = height - ((float(box.lower[1]) - float(y0)) * scale + bh)
        color = _STATUS_COLORS[status]
        label = ",".join(sorted(labels))
        name = rid if isinstance(rid, str) else format_region_id(rid)
        title = name + (f" [{label}]" if label else "")
        parts.append(
            f'<rect x="{bx0:.2f}" y="{by0:.2f}" width="{bw:.2f}" '
            f'height="{bh:.2f}" fill="{color}" stroke="black" '
            f'stroke-width="0.8"><title>{title}</title></rect>')
    parts.append("</svg>")
    return "\n".join(parts)


def partition_to_svg(forest: PartitionForest, width: int = 480) -> str:
    """SVG rendering of the current leaves (2-D partitions only)."""
    rows = [(rid, forest.nodes[rid].box, forest.nodes[rid].status,
             forest.nodes[rid].labels) for rid in forest.leaves]
    return render_svg(forest.domain, rows, width)


def write_partition_artifacts(forest: PartitionForest, json_path, svg_path=None):
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(partition_to_json(forest), fh, indent=1)
    if svg_path is not None and forest.domain.dim == 2:
        with open(svg_path, "w", encoding="utf-8") as fh:
            fh.write(partition_to_svg(forest))
