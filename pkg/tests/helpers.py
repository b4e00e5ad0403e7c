"""Independent oracles used by the test suite.

These deliberately avoid the library's own graph code: the distance oracle
is a heap-based Dijkstra (vs the library's BFS flood) and the sum-of-costs
oracle searches the joint configuration space directly.
"""

from __future__ import annotations

import heapq
import itertools


def dijkstra_distance_field(width, height, obstacles, goal):
    """Unit-cost Dijkstra from the goal; -1 for blocked/unreachable cells."""
    dist = {goal: 0}
    heap = [(0, goal)]
    while heap:
        d, (r, c) = heapq.heappop(heap)
        if d > dist[(r, c)]:
            continue
        for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if not (0 <= nr < height and 0 <= nc < width):
                continue
            if (nr, nc) in obstacles:
                continue
            if d + 1 < dist.get((nr, nc), float("inf")):
                dist[(nr, nc)] = d + 1
                heapq.heappush(heap, (d + 1, (nr, nc)))
    field = [[-1] * width for _ in range(height)]
    for (r, c), d in dist.items():
        field[r][c] = d
    return field


def joint_soc_oracle(grid, starts, goals, credit_cap=12):
    """Optimal sum-of-costs over the joint configuration space.

    Cost accounting matches the usual MAPF convention: an agent pays one per
    tick until it reaches its goal for the last time; waiting at the goal is
    free unless the agent later leaves, in which case the deferred waits are
    charged retroactively (tracked as per-agent credits). Vertex and swap
    collisions are forbidden.
    """
    k = len(starts)
    start_state = (tuple(starts), (0,) * k)
    best = {start_state: 0}
    heap = [(0, start_state)]
    while heap:
        g, (positions, credits) = heapq.heappop(heap)
        if g > best.get((positions, credits), float("inf")):
            continue
        if all(p == goal for p, goal in zip(positions, goals)):
            return g
        per_agent = []
        for i, pos in enumerate(positions):
            options = []
            at_goal = pos == goals[i]
            # waiting
            if at_goal:
                if credits[i] < credit_cap:
                    options.append((pos, 0, credits[i] + 1))
            else:
                options.append((pos, 1, 0))
            for nxt in grid.neighbors(pos):
                cost = (credits[i] + 1) if at_goal else 1
                options.append((nxt, cost, 0))
            per_agent.append(options)
        for combo in itertools.product(*per_agent):
            new_positions = tuple(opt[0] for opt in combo)
            if len(set(new_positions)) != k:
                continue
            if any(
                new_positions[i] == positions[j] and new_positions[j] == positions[i]
                for i in range(k)
                for j in range(i + 1, k)
                if new_positions[i] != positions[i]
            ):
                continue
            ng = g + sum(opt[1] for opt in combo)
            new_credits = tuple(opt[2] for opt in combo)
            key = (new_positions, new_credits)
            if ng < best.get(key, float("inf")):
                best[key] = ng
                heapq.heappush(heap, (ng, key))
    raise RuntimeError("joint search exhausted without reaching the goals")
