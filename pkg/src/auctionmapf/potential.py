"""Per-goal potential maps: exact shortest-path distance fields on the grid.

A breadth-first flood from the goal assigns each free cell its hop count to
the goal; on a unit-cost grid this equals the A* distance. Exact distances
have no local minima, so greedy descent always makes progress when unblocked.
"""

from __future__ import annotations

import io
from collections import deque
from dataclasses import dataclass

from .world import Cell, GridWorld

UNREACHABLE = -1


@dataclass(frozen=True)
class PotentialMap:
    goal: Cell
    values: tuple[tuple[int, ...], ...]  # [row][col]; UNREACHABLE for blocked cells

    def __getitem__(self, cell: Cell) -> int:
        return self.values[cell[0]][cell[1]]

    def reachable(self, cell: Cell) -> bool:
        return self[cell] != UNREACHABLE

    def to_csv(self) -> str:
        buf = io.StringIO()
        for row in self.values:
            buf.write(",".join(str(v) for v in row))
            buf.write("\n")
        return buf.getvalue()


def build_potential_map(grid: GridWorld, goal: Cell) -> PotentialMap:
    if not grid.is_free(goal):
        raise ValueError(f"goal {goal} is not a free cell")
    values = [[UNREACHABLE] * grid.width for _ in range(grid.height)]
    values[goal[0]][goal[1]] = 0
    queue = deque([goal])
    while queue:
        cell = queue.popleft()
        d = values[cell[0]][cell[1]]
        for nr, nc in grid.neighbors(cell):
            if values[nr][nc] == UNREACHABLE:
                values[nr][nc] = d + 1
                queue.append((nr, nc))
    return PotentialMap(goal=goal, values=tuple(tuple(row) for row in values))


def build_potential_maps(grid: GridWorld, goals: list[Cell]) -> dict[Cell, PotentialMap]:
    """One map per distinct goal."""
    return {goal: build_potential_map(grid, goal) for goal in set(goals)}
