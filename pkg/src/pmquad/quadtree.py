"""Point quadtrees over the unit square and exact partial-match query costs.

The cost of a partial match at the vertical line x = s equals the number of
tree nodes whose cell meets the line, which is also the number of nodes
visited by the recursive search and the number of horizontal split segments
crossing the line (the latter two are kept as independently coded oracles).
``line_cost`` computes the same count straight from a point sequence without
materializing nodes, which is what makes desk-scale Monte Carlo cheap.
"""

from __future__ import annotations

from bisect import bisect_right

import numpy as np

from .errors import DuplicateCoordinateError
from .geom import Cell, Point2, StepProfile

__all__ = [
    "QuadNode",
    "QuadTree",
    "build",
    "sample_uniform_points",
    "sample_uniform_xy",
    "cost",
    "horizontal_crossings",
    "profile",
    "supremum",
    "subtree_sizes",
    "sample_poisson_tree",
    "sample_poisson_xy",
    "line_cost",
    "coupled_extension_cost",
    "sample_extension_xy",
]

# children are ordered bottom-left, top-left, bottom-right, top-right
_BL, _TL, _BR, _TR = 0, 1, 2, 3


class QuadNode:
    __slots__ = ("point", "cell", "children")

    def __init__(self, point: Point2, cell: Cell):
        self.point = point
        self.cell = cell
        self.children = [None, None, None, None]

    def child_index(self, x: float, y: float) -> int:
        """Quadrant of (x, y) relative to this node's stored point."""
        left = x < self.point.x
        bottom = y < self.point.y
        if left:
            return _BL if bottom else _TL
        return _BR if bottom else _TR

    def child_cell(self, idx: int) -> Cell:
        """The cell a child at quadrant idx occupies (whether or not it exists)."""
        px, py = self.point.x, self.point.y
        c = self.cell
        x0, x1 = (c.x0, px) if idx in (_BL, _TL) else (px, c.x1)
        y0, y1 = (c.y0, py) if idx in (_BL, _BR) else (py, c.y1)
        return Cell(x0, x1, y0, y1)


class QuadTree:
    """Immutable-after-build quadtree; ``root`` is None for the empty tree."""

    __slots__ = ("root", "size")

    def __init__(self, root, size: int):
        self.root = root
        self.size = size

    def nodes(self):
        """All nodes, depth-first."""
        stack = [self.root] if self.root is not None else []
        while stack:
            node = stack.pop()
            yield node
            for child in node.children:
                if child is not None:
                    stack.append(child)

    def nodes_with_depth(self):
        stack = [(self.root, 0)] if self.root is not None else []
        while stack:
            node, d = stack.pop()
            yield node, d
            for child in node.children:
                if child is not None:
                    stack.append((child, d + 1))


def _check_general_position(points) -> None:
    xs, ys = set(), set()
    for p in points:
        if p.x in xs or p.y in ys:
            raise DuplicateCoordinateError(
                f"point {p.index} repeats a coordinate; inputs must be in general position"
            )
        xs.add(p.x)
        ys.add(p.y)


def build(points) -> QuadTree:
    """Insert points in index order, starting from the unit-square root cell."""
    points = list(points)
    _check_general_position(points)
    root = None
    for p in points:
        if root is None:
            root = QuadNode(p, Cell(0.0, 1.0, 0.0, 1.0))
            continue
        node = root
        while True:
            idx = node.child_index(p.x, p.y)
            child = node.children[idx]
            if child is None:
                node.children[idx] = QuadNode(p, node.child_cell(idx))
                break
            node = child
    return QuadTree(root, len(points))


def sample_uniform_xy(n: int, rng) -> tuple:
    """n i.i.d. uniform coordinates as (xs, ys) arrays; cheap form of sampling."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    return rng.random(n), rng.random(n)


def sample_uniform_points(n: int, rng):
    """n i.i.d. uniform points of the unit square, in insertion order."""
    xs, ys = sample_uniform_xy(n, rng)
    return [Point2(float(x), float(y), i) for i, (x, y) in enumerate(zip(xs, ys))]


def _check_query(s: float) -> None:
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"query position must lie in [0, 1], got {s!r}")


def cost(tree: QuadTree, s: float) -> int:
    """Nodes visited by the partial-match search at x = s.

    Descends only into the two children on the side of the split containing
    the line; the line at a split coordinate goes right.
    """
    _check_query(s)
    if tree.root is None:
        return 0
    count = 0
    stack = [tree.root]
    while stack:
        node = stack.pop()
        count += 1
        pair = (_BL, _TL) if s < node.point.x else (_BR, _TR)
        for idx in pair:
            child = node.children[idx]
            if child is not None:
                stack.append(child)
    return count


def horizontal_crossings(tree: QuadTree, s: float) -> int:
    """Nodes whose horizontal split segment crosses x = s.

    The segment spans the node's full cell x-extent at the node's y, so this
    is a whole-tree enumeration — an independent oracle for ``cost``.
    """
    _check_query(s)
    return sum(1 for node in tree.nodes() if node.cell.crosses_line(s))


def profile(tree: QuadTree) -> StepProfile:
    """The exact step function s -> cost(tree, s)."""
    events = []
    for node in tree.nodes():
        events.append((node.cell.x0, +1))
        events.append((node.cell.x1, -1))
    return StepProfile.from_events(events)


def supremum(tree: QuadTree):
    """(max cost, first maximizing interval [lo, hi)) over all query positions."""
    return profile(tree).max_segment()


def subtree_sizes(tree: QuadTree):
    """Node counts of the four root subtrees (BL, TL, BR, TR); they sum to n - 1."""
    if tree.root is None:
        raise ValueError("subtree_sizes needs a nonempty tree")

    def count(node):
        if node is None:
            return 0
        total = 0
        stack = [node]
        while stack:
            cur = stack.pop()
            total += 1
            stack.extend(c for c in cur.children if c is not None)
        return total

    return tuple(count(child) for child in tree.root.children)


def sample_poisson_xy(t: float, rng) -> tuple:
    """A Poisson(t) number of uniform points as (xs, ys), in arrival order."""
    if t < 0.0:
        raise ValueError(f"intensity budget t must be >= 0, got {t}")
    n = int(rng.poisson(t))
    return sample_uniform_xy(n, rng)


def sample_poisson_tree(t: float, rng) -> QuadTree:
    """Quadtree of a unit-intensity Poisson process run for time t."""
    xs, ys = sample_poisson_xy(t, rng)
    pts = [Point2(float(x), float(y), i) for i, (x, y) in enumerate(zip(xs, ys))]
    return build(pts)


def line_cost(xs, ys, s: float, x_lo: float = 0.0, x_hi: float = 1.0) -> int:
    """cost(build(points), s) computed without building nodes.

    Maintains the stack of leaf cells crossing the line (they always tile
    [0, 1] in y, each carrying its x-extent): a point landing inside one is a
    crossing node and splits its slice; all other points are irrelevant to
    the count.  The root box is [x_lo, x_hi] x [0, 1], so the same routine
    also serves the extended-box coupling.
    """
    _check_query(s)
    if not x_lo <= s <= x_hi:
        raise ValueError("query line must lie inside the root box")
    xs = xs.tolist() if hasattr(xs, "tolist") else list(xs)
    ys = ys.tolist() if hasattr(ys, "tolist") else list(ys)
    yb = [0.0]  # slice i spans [yb[i], yb[i+1]) in y, the last one up to 1
    lo = [x_lo]
    hi = [x_hi]
    count = 0
    ins = yb.insert
    for x, y in zip(xs, ys):
        i = bisect_right(yb, y) - 1
        a = lo[i]
        b = hi[i]
        if a <= x and (x < b or x == b == x_hi == 1.0):
            count += 1
            if s < x:
                hi[i] = x
            else:
                lo[i] = x
            ins(i + 1, y)
            lo.insert(i + 1, lo[i])
            hi.insert(i + 1, hi[i])
    return count


def sample_extension_xy(t: float, eps: float, rng) -> tuple:
    """Unit-intensity Poisson sample on [-eps, 1] x [0, 1] run for time t.

    The count is Poisson(t (1 + eps)); arrival order is the generation order.
    """
    if eps < 0.0:
        raise ValueError(f"eps must be >= 0, got {eps}")
    if t < 0.0:
        raise ValueError(f"intensity budget t must be >= 0, got {t}")
    n = int(rng.poisson(t * (1.0 + eps)))
    xs = rng.random(n) * (1.0 + eps) - eps
    ys = rng.random(n)
    return xs, ys


def coupled_extension_cost(xs, ys, eps: float, s: float):
    """(base cost, extended cost) at x = s from one shared point sample.

    The extended tree is built on the box [-eps, 1] x [0, 1] from all points;
    the base tree on the unit square from the points with x >= 0, in the same
    arrival order.  Both counts are horizontal-line crossings of x = s, and
    the base count never exceeds the extended one pathwise.
    """
    if eps < 0.0:
        raise ValueError(f"eps must be >= 0, got {eps}")
    _check_query(s)
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    extended = line_cost(xs, ys, s, x_lo=-eps)
    keep = xs >= 0.0
    base = line_cost(xs[keep], ys[keep], s)
    return base, extended
