"""
Grid navmesh and A* planner for pedestrians.

Path costs are kept as (straight, diagonal) move counts so equal-cost
alternatives compare exactly equal; which one wins is decided by the
frontier's tie-break key.
"""
from __future__ import annotations

import heapq
import itertools
import math
from typing import Iterator

import numpy as np

from simvar.app.errors import PathNotFoundError
from simvar.app.minisim.scenario import FrontierMode, MapBounds, NavmeshSpec

SQRT2 = math.sqrt(2.0)
WAYPOINT_SPACING = 0.1

Cell = tuple[int, int]
XY = tuple[float, float]

_MOVES: tuple[Cell, ...] = ((1, 0), (0, 1), (-1, 0), (0, -1), (1, 1), (-1, 1), (-1, -1), (1, -1))


def _cost(straight: int, diagonal: int) -> float:
    return straight + diagonal * SQRT2


class Navmesh:
    def __init__(self, bounds: MapBounds, spec: NavmeshSpec | None = None) -> None:
        spec = spec or NavmeshSpec()
        self.cell_size = spec.cell_size
        self.width = math.ceil(bounds.width / self.cell_size)
        self.height = math.ceil(bounds.height / self.cell_size)
        self.blocked: set[Cell] = {tuple(c) for c in spec.blocked_cells}
        for rect in spec.blocked_rects:
            for cx in range(self.width):
                for cy in range(self.height):
                    x, y = self.center((cx, cy))
                    if rect.x0 <= x < rect.x1 and rect.y0 <= y < rect.y1:
                        self.blocked.add((cx, cy))

    def cell_of(self, p: XY) -> Cell:
        cx = min(max(int(p[0] // self.cell_size), 0), self.width - 1)
        cy = min(max(int(p[1] // self.cell_size), 0), self.height - 1)
        return (cx, cy)

    def center(self, cell: Cell) -> XY:
        return ((cell[0] + 0.5) * self.cell_size, (cell[1] + 0.5) * self.cell_size)

    def is_free(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height and cell not in self.blocked

    def neighbours(self, cell: Cell) -> Iterator[tuple[Cell, bool]]:
        """Free 8-connected neighbours; diagonals may not cut a blocked corner."""
        x, y = cell
        for dx, dy in _MOVES:
            nxt = (x + dx, y + dy)
            if not self.is_free(nxt):
                continue
            diagonal = dx != 0 and dy != 0
            if diagonal and not (self.is_free((x + dx, y)) and self.is_free((x, y + dy))):
                continue
            yield nxt, diagonal


def octile(a: Cell, b: Cell) -> tuple[int, int]:
    dx, dy = abs(a[0] - b[0]), abs(a[1] - b[1])
    return (max(dx, dy) - min(dx, dy), min(dx, dy))


class Frontier:
    """Priority queue of (f-cost, tie-break key, node)."""

    def __init__(self, mode: FrontierMode = FrontierMode.STABLE, rng: np.random.Generator | None = None) -> None:
        self.mode = mode
        self._heap: list[tuple[float, float, Cell]] = []
        self._counter = itertools.count()
        if mode is FrontierMode.RANDOM and rng is None:
            rng = np.random.default_rng()
        self._rng = rng

    def _key(self) -> float:
        if self.mode is FrontierMode.STABLE:
            return next(self._counter)
        if self.mode is FrontierMode.HEAP:
            # constant key: ties fall through to the node coordinates
            return 0
        return float(self._rng.random())

    def push(self, f: float, node: Cell) -> None:
        heapq.heappush(self._heap, (f, self._key(), node))

    def pop(self) -> Cell:
        return heapq.heappop(self._heap)[2]

    def __len__(self) -> int:
        return len(self._heap)


def plan_cells(
    navmesh: Navmesh,
    start: Cell,
    goal: Cell,
    mode: FrontierMode = FrontierMode.STABLE,
    rng: np.random.Generator | None = None,
) -> tuple[list[Cell], tuple[int, int]]:
    """
    A* over grid cells.

    Returns:
        (cells from start to goal, (straight, diagonal) move counts)

    Raises:
        PathNotFoundError: start or goal blocked, or goal unreachable.
    """
    for name, cell in (("start", start), ("goal", goal)):
        if not navmesh.is_free(cell):
            raise PathNotFoundError(f"{name} cell {cell} is blocked or outside the grid")
    frontier = Frontier(mode, rng)
    best: dict[Cell, tuple[int, int]] = {start: (0, 0)}
    parent: dict[Cell, Cell] = {}
    closed: set[Cell] = set()
    h = octile(start, goal)
    frontier.push(_cost(*h), start)
    while frontier:
        current = frontier.pop()
        if current == goal:
            cells = [goal]
            while cells[-1] != start:
                cells.append(parent[cells[-1]])
            return cells[::-1], best[goal]
        if current in closed:
            continue
        closed.add(current)
        s, d = best[current]
        for nxt, diagonal in navmesh.neighbours(current):
            if nxt in closed:
                continue
            g = (s, d + 1) if diagonal else (s + 1, d)
            known = best.get(nxt)
            if known is not None and _cost(*g) >= _cost(*known):
                continue
            best[nxt] = g
            parent[nxt] = current
            hs, hd = octile(nxt, goal)
            frontier.push(_cost(g[0] + hs, g[1] + hd), nxt)
    raise PathNotFoundError(f"no path from {start} to {goal}")


def densify(points: list[XY], spacing: float = WAYPOINT_SPACING) -> list[XY]:
    """Inserts points so consecutive waypoints are at most ``spacing`` apart."""
    if not points:
        return []
    out: list[XY] = [points[0]]
    for a, b in zip(points, points[1:]):
        length = math.hypot(b[0] - a[0], b[1] - a[1])
        if length == 0:
            continue
        pieces = max(1, math.ceil(length / spacing - 1e-9))
        for i in range(1, pieces):
            f = i / pieces
            out.append((a[0] + (b[0] - a[0]) * f, a[1] + (b[1] - a[1]) * f))
        out.append(b)
    return out


def plan_path(
    navmesh: Navmesh,
    start: XY,
    goal: XY,
    mode: FrontierMode = FrontierMode.STABLE,
    rng: np.random.Generator | None = None,
) -> list[XY]:
    """
    Optimal-cost path from start to goal as waypoints at most 0.1 m apart:
    the exact start, the centres of the intermediate cells, the exact goal.
    """
    if start == goal:
        return [start]
    cells, _ = plan_cells(navmesh, navmesh.cell_of(start), navmesh.cell_of(goal), mode, rng)
    corners = [start] + [navmesh.center(c) for c in cells[1:-1]] + [goal]
    return densify(corners)


def path_length(points: list[XY]) -> float:
    return math.fsum(math.hypot(b[0] - a[0], b[1] - a[1]) for a, b in zip(points, points[1:]))


__all__ = ["Navmesh", "Frontier", "plan_cells", "plan_path", "densify", "octile", "path_length"]
