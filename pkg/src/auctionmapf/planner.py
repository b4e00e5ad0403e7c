"""One-step-lookahead motion planner with auction-based conflict resolution.

Each tick every active agent proposes a multi-cell step descending its goal's
potential map. Proposals whose swept segments intersect form a conflict; the
planner first tries to reassign contenders to equal-cost alternative moves,
then resolves residual conflicts with the configured resolver (auction,
random ordering, or FIFO). A resolved ordering persists: the turn-q
contender passes on the q-th tick after resolution while the rest wait.
"""

from __future__ import annotations

import copy
import random
import time as _time
from dataclasses import dataclass, field
from fractions import Fraction
from collections import deque
from typing import Callable, Optional, Sequence

from .auction import Bid, harmonic_schedule, run_auction
from .potential import PotentialMap, build_potential_maps
from .world import (
    AgentState,
    Cell,
    GridWorld,
    MoveAction,
    Scenario,
    WAIT,
    apply_action,
    sweep_cells,
)

AXES = {"up": "row", "down": "row", "left": "col", "right": "col"}
RESOLVERS = ("auction", "random-ordering", "fifo")

# ticks an agent may sit blocked before it tries a one-step sidestep; descent
# alone deadlocks on head-on meetings, so a local escape heuristic is needed
STALL_ESCAPE_TICKS = 2

# cells of recent-position memory the escape move avoids revisiting
ESCAPE_TABU_LEN = 8

# once an escape starts the agent commits to wandering this many ticks, so it
# actually backs away from a jam instead of bouncing straight back in
ESCAPE_COMMIT_TICKS = 4


@dataclass
class Conflict:
    cell: Cell                      # representative contested cell
    time: int
    contenders: set[int]
    cells: frozenset[Cell] = frozenset()


@dataclass
class TurnOrdering:
    ordering: dict[int, int]                  # agent id -> turn (1-based)
    payments: dict[int, Fraction]
    utilities: dict[int, Fraction]


@dataclass
class ResolvedConflict:
    tick: int
    cell: Cell
    contenders: tuple[int, ...]
    bids: dict[int, Fraction]
    ordering: TurnOrdering


@dataclass
class TraceLine:
    tick: int
    agent_id: int
    row: int
    col: int
    direction: str
    step: int
    waiting: bool


@dataclass
class SimulationTrace:
    configurations: list[list[Cell]]
    conflicts: list[ResolvedConflict]
    collisions: list[tuple[int, Cell, tuple[int, ...]]]
    arrival_times: dict[int, Optional[int]]
    lines: list[TraceLine]
    ticks: int
    completed: bool
    deadlocked: bool = False
    timed_out: bool = False
    guard_waits: int = 0

    def export_lines(self) -> str:
        out = []
        for ln in self.lines:
            out.append(
                f"{ln.tick},{ln.agent_id},{ln.row},{ln.col},{ln.direction},{ln.step},"
                f"{int(ln.waiting)}"
            )
        return "\n".join(out)


@dataclass
class _ActiveOrder:
    cell: Cell
    holders: dict[int, int]  # agent id -> release tick


def _max_step(
    grid: GridWorld,
    pot: PotentialMap,
    pos: Cell,
    direction: str,
    limit: int,
    occupied: set[Cell],
) -> int:
    """Longest sweep in a direction that descends the potential every cell."""
    from .world import DIRECTIONS

    dr, dc = DIRECTIONS[direction]
    r, c = pos
    prev = pot[pos]
    tau = 0
    while tau < limit:
        r, c = r + dr, c + dc
        nxt = (r, c)
        if not grid.is_free(nxt) or nxt in occupied:
            break
        val = pot[nxt]
        if val < 0 or val >= prev:
            break
        prev = val
        tau += 1
    return tau


def propose_move(
    grid: GridWorld,
    pot: PotentialMap,
    agent: AgentState,
    occupied: set[Cell],
) -> MoveAction:
    """One agent's greedy descending move; wait only when fully blocked."""
    goal = agent.goal
    pos = agent.pos
    best_by_axis: dict[str, tuple[str, int]] = {}
    for direction in ("up", "down", "left", "right"):
        tau = _max_step(grid, pot, pos, direction, agent.incentive, occupied)
        if tau >= 1:
            axis = AXES[direction]
            if axis not in best_by_axis or tau > best_by_axis[axis][1]:
                best_by_axis[axis] = (direction, tau)
    if not best_by_axis:
        return WAIT
    if len(best_by_axis) == 1:
        direction, tau = next(iter(best_by_axis.values()))
        return MoveAction(direction, tau)
    remaining_row = abs(pos[0] - goal[0])
    remaining_col = abs(pos[1] - goal[1])
    # prefer the axis with more ground to cover; break the remaining tie
    # row-before-column so runs are reproducible
    axis = "col" if remaining_col > remaining_row else "row"
    direction, tau = best_by_axis[axis]
    return MoveAction(direction, tau)


def escape_move(
    grid: GridWorld,
    pot: PotentialMap,
    agent: AgentState,
    occupied: set[Cell],
    tabu: Sequence[Cell] = (),
) -> MoveAction:
    """One-step sidestep for an agent that has been blocked for a while.

    Picks the free, unoccupied neighbor with the lowest potential, preferring
    cells not in the agent's recent-position memory so opposing groups back
    out of corridors instead of oscillating in place.
    """
    from .world import DIRECTIONS

    candidates = []
    recency = {cell: i for i, cell in enumerate(reversed(tabu))}
    for direction in ("up", "down", "left", "right"):
        dr, dc = DIRECTIONS[direction]
        nxt = (agent.pos[0] + dr, agent.pos[1] + dc)
        if not grid.is_free(nxt) or nxt in occupied or not pot.reachable(nxt):
            continue
        fresh = 0 if nxt not in recency else len(tabu) - recency[nxt]
        candidates.append((fresh, pot[nxt], direction))
    if not candidates:
        return WAIT
    candidates.sort()
    return MoveAction(candidates[0][2], 1)


def propose_moves(
    grid: GridWorld,
    potentials: dict[Cell, PotentialMap],
    agents: list[AgentState],
) -> dict[int, MoveAction]:
    occupied = {a.pos for a in agents if not a.arrived}
    out = {}
    for a in agents:
        if a.arrived:
            continue
        out[a.id] = propose_move(grid, potentials[a.goal], a, occupied - {a.pos})
    return out


def detect_conflicts(
    proposals: dict[int, tuple[Cell, MoveAction]],
    tick: int = 0,
) -> list[Conflict]:
    """Group agents whose same-tick sweeps share any cell; groups merge
    transitively so each agent lands in at most one conflict."""
    cell_users: dict[Cell, list[int]] = {}
    sweeps: dict[int, list[Cell]] = {}
    for aid, (pos, action) in proposals.items():
        if action.direction == "wait":
            continue
        cells = sweep_cells(pos, action)
        sweeps[aid] = cells
        for cell in cells:
            cell_users.setdefault(cell, []).append(aid)

    parent: dict[int, int] = {}

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a: int, b: int) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    shared = {cell: aids for cell, aids in cell_users.items() if len(aids) > 1}
    for aids in shared.values():
        for aid in aids:
            parent.setdefault(aid, aid)
        for other in aids[1:]:
            union(aids[0], other)

    groups: dict[int, set[int]] = {}
    for aid in parent:
        groups.setdefault(find(aid), set()).add(aid)

    conflicts = []
    for members in groups.values():
        cells = frozenset(
            cell for cell, aids in shared.items() if len(set(aids) & members) > 1
        )
        conflicts.append(
            Conflict(cell=min(cells), time=tick, contenders=members, cells=cells)
        )
    conflicts.sort(key=lambda c: c.cell)
    return conflicts


def try_reassign(
    conflict: Conflict,
    grid: GridWorld,
    potentials: dict[Cell, PotentialMap],
    proposals: dict[int, tuple[Cell, MoveAction]],
    agents_by_id: dict[int, AgentState],
    occupied: set[Cell],
) -> Conflict:
    """Move contenders to equal-descent alternative targets where possible.

    Mutates proposals for reassigned agents and returns the residual conflict.
    """
    other_cells: dict[Cell, set[int]] = {}
    for aid, (pos, action) in proposals.items():
        if action.direction == "wait":
            cells = [pos]
        else:
            cells = sweep_cells(pos, action)
        for cell in cells:
            other_cells.setdefault(cell, set()).add(aid)

    residual = set(conflict.contenders)
    for aid in sorted(conflict.contenders):
        pos, action = proposals[aid]
        if action.direction == "wait":
            continue
        agent = agents_by_id[aid]
        pot = potentials[agent.goal]
        tau = action.step
        for direction in ("up", "down", "left", "right"):
            if direction == action.direction:
                continue
            alt_tau = _max_step(grid, pot, pos, direction, agent.incentive, occupied - {pos})
            if alt_tau != tau:
                continue
            alt = MoveAction(direction, alt_tau)
            alt_cells = sweep_cells(pos, alt)
            clash = False
            for cell in alt_cells:
                users = other_cells.get(cell, set())
                if users - {aid}:
                    clash = True
                    break
            if clash:
                continue
            # accept the reassignment and update the shared-cell index
            for cell in sweep_cells(pos, action):
                other_cells.get(cell, set()).discard(aid)
            for cell in alt_cells:
                other_cells.setdefault(cell, set()).add(aid)
            proposals[aid] = (pos, alt)
            residual.discard(aid)
            break

    cells = frozenset(conflict.cells)
    return Conflict(cell=conflict.cell, time=conflict.time, contenders=residual, cells=cells)


def _resolve(
    resolver: str,
    contenders: list[AgentState],
    arrivals: dict[int, int],
    rng: random.Random,
) -> tuple[TurnOrdering, dict[int, Fraction]]:
    bids = {a.id: Fraction(a.incentive) for a in contenders}
    if resolver == "auction":
        outcome = run_auction(
            [Bid(a.id, bids[a.id], arrivals[a.id]) for a in contenders],
            schedule=harmonic_schedule(len(contenders)),
        )
        return TurnOrdering(outcome.ordering, outcome.payments, outcome.utilities), bids
    if resolver == "random-ordering":
        ids = sorted(a.id for a in contenders)
        rng.shuffle(ids)
        ordering = {aid: q for q, aid in enumerate(ids, start=1)}
    elif resolver == "fifo":
        ids = sorted((a.id for a in contenders), key=lambda i: (arrivals[i], i))
        ordering = {aid: q for q, aid in enumerate(ids, start=1)}
    else:
        raise ValueError(f"unknown resolver {resolver!r}")
    schedule = harmonic_schedule(len(contenders))
    payments = {aid: Fraction(0) for aid in ordering}
    utilities = {aid: bids[aid] * schedule.alpha(q) for aid, q in ordering.items()}
    return TurnOrdering(ordering, payments, utilities), bids


def default_tick_limit(scenario: Scenario) -> int:
    g = scenario.grid
    return 4 * (g.width + g.height) * len(scenario.agents)


def run_trial(
    scenario: Scenario,
    resolver: str = "auction",
    tick_limit: Optional[int] = None,
    timeout: Optional[float] = None,
) -> SimulationTrace:
    """Simulate one trial; deterministic given (scenario, resolver)."""
    if resolver not in RESOLVERS:
        raise ValueError(f"resolver must be one of {RESOLVERS}")
    if tick_limit is None:
        tick_limit = default_tick_limit(scenario)
    if tick_limit < 1:
        raise ValueError("tick_limit must be >= 1")

    agents = [
        AgentState(id=a.id, pos=a.pos, goal=a.goal, incentive=a.incentive)
        for a in scenario.agents
    ]
    agents_by_id = {a.id: a for a in agents}
    grid = scenario.grid
    potentials = build_potential_maps(grid, [a.goal for a in agents])
    rng = random.Random(f"{scenario.seed}:{resolver}")

    configurations = [[a.pos for a in agents]]
    resolved_log: list[ResolvedConflict] = []
    collisions: list[tuple[int, Cell, tuple[int, ...]]] = []
    lines: list[TraceLine] = []
    orders: list[_ActiveOrder] = []
    contention_tick: dict[tuple[int, Cell], int] = {}
    stall: dict[int, int] = {a.id: 0 for a in agents}
    excursion: dict[int, int] = {a.id: 0 for a in agents}
    tabu: dict[int, deque] = {a.id: deque(maxlen=ESCAPE_TABU_LEN) for a in agents}
    stale_window = 10 * (grid.width + grid.height)
    best_remaining = None
    last_improvement = 0
    idle_ticks = 0
    guard_waits = 0
    deadlocked = False
    timed_out = False
    start_time = _time.monotonic()
    t = 0

    for a in agents:
        if a.pos == a.goal:
            a.arrived = True
            a.arrival_time = 0

    while t < tick_limit:
        active = [a for a in agents if not a.arrived]
        if not active:
            break
        if timeout is not None and _time.monotonic() - start_time > timeout:
            timed_out = True
            break

        occupied = {a.pos for a in active}
        held = {
            aid: release
            for order in orders
            for aid, release in order.holders.items()
            if release > t and not agents_by_id[aid].arrived
        }

        proposals: dict[int, tuple[Cell, MoveAction]] = {}
        for a in active:
            if a.id in held:
                proposals[a.id] = (a.pos, WAIT)
                continue
            move = propose_move(grid, potentials[a.goal], a, occupied - {a.pos})
            if move.direction == "wait" and stall[a.id] >= STALL_ESCAPE_TICKS:
                if excursion[a.id] == 0:
                    excursion[a.id] = ESCAPE_COMMIT_TICKS
            if excursion[a.id] > 0:
                excursion[a.id] -= 1
                move = escape_move(
                    grid, potentials[a.goal], a, occupied - {a.pos}, tuple(tabu[a.id])
                )
            proposals[a.id] = (a.pos, move)

        conflicts = detect_conflicts(proposals, tick=t)

        # movers intruding on a cell with an unexpired ordering force a fresh
        # auction among the remaining holders plus the newcomers
        in_conflict = {aid for c in conflicts for aid in c.contenders}
        for order in list(orders):
            pending = {aid for aid, rel in order.holders.items() if rel > t}
            if not pending:
                continue
            intruders = set()
            for aid, (pos, action) in proposals.items():
                if action.direction == "wait" or aid in order.holders:
                    continue
                if order.cell in sweep_cells(pos, action):
                    intruders.add(aid)
            if not intruders:
                continue
            members = pending | intruders
            merged = [c for c in conflicts if c.contenders & members]
            for c in merged:
                members |= c.contenders
                conflicts.remove(c)
            conflicts.append(
                Conflict(cell=order.cell, time=t, contenders=members,
                         cells=frozenset({order.cell}))
            )
            orders.remove(order)
        conflicts.sort(key=lambda c: c.cell)

        residuals = []
        for conflict in conflicts:
            residuals.append(
                try_reassign(conflict, grid, potentials, proposals, agents_by_id, occupied)
            )

        for conflict in residuals:
            if len(conflict.contenders) < 2:
                continue
            for aid in conflict.contenders:
                contention_tick.setdefault((aid, conflict.cell), t)
            arrivals = {aid: contention_tick[(aid, conflict.cell)] for aid in conflict.contenders}
            contenders = [agents_by_id[aid] for aid in sorted(conflict.contenders)]
            ordering, bids = _resolve(resolver, contenders, arrivals, rng)
            orders.append(
                _ActiveOrder(
                    cell=conflict.cell,
                    holders={aid: t + q - 1 for aid, q in ordering.ordering.items()},
                )
            )
            resolved_log.append(
                ResolvedConflict(
                    tick=t,
                    cell=conflict.cell,
                    contenders=tuple(sorted(conflict.contenders)),
                    bids=bids,
                    ordering=ordering,
                )
            )
            for aid, q in ordering.ordering.items():
                if q > 1:
                    proposals[aid] = (agents_by_id[aid].pos, WAIT)
                elif proposals[aid][1].direction == "wait":
                    # winner was holding from a superseded ordering: give it a
                    # fresh move, vetted below by the final safety pass
                    a = agents_by_id[aid]
                    proposals[aid] = (
                        a.pos,
                        propose_move(grid, potentials[a.goal], a, occupied - {a.pos}),
                    )

        # final safety pass: executed sweeps must be pairwise disjoint
        taken: dict[Cell, int] = {}
        for a in active:
            if proposals[a.id][1].direction == "wait":
                taken[a.pos] = a.id
        moved_any = False
        for a in sorted(active, key=lambda x: x.id):
            pos, action = proposals[a.id]
            if action.direction == "wait":
                if a.id not in held:
                    stall[a.id] += 1
                lines.append(TraceLine(t, a.id, pos[0], pos[1], "wait", 0, True))
                continue
            cells = sweep_cells(pos, action)
            if any(cell in taken for cell in cells[1:]):
                proposals[a.id] = (pos, WAIT)
                taken[pos] = a.id
                guard_waits += 1
                stall[a.id] += 1
                lines.append(TraceLine(t, a.id, pos[0], pos[1], "wait", 0, True))
                continue
            for cell in cells:
                taken[cell] = a.id
            a.pos = apply_action(pos, action, grid)
            tabu[a.id].append(pos)
            stall[a.id] = 0
            moved_any = True
            lines.append(TraceLine(t, a.id, a.pos[0], a.pos[1], action.direction, action.step, False))

        for a in active:
            if not a.arrived and a.pos == a.goal:
                a.arrived = True
                a.arrival_time = t + 1

        configurations.append([a.pos for a in agents])

        for order in list(orders):
            order.holders = {
                aid: rel
                for aid, rel in order.holders.items()
                if rel > t and not agents_by_id[aid].arrived
            }
            if not order.holders:
                orders.remove(order)

        pending_release = any(rel > t for order in orders for rel in order.holders.values())
        idle_ticks = 0 if moved_any else idle_ticks + 1
        # a single all-wait tick is not terminal: blocked agents escape only
        # after their stall counter builds up
        if idle_ticks > STALL_ESCAPE_TICKS + 1 and not pending_release:
            deadlocked = True
            t += 1
            break

        # stalemate: nobody has gotten closer to a goal for a long stretch,
        # so further ticks just repeat an oscillation
        remaining = sum(
            potentials[a.goal][a.pos] for a in agents if not a.arrived
        )
        if best_remaining is None or remaining < best_remaining:
            best_remaining = remaining
            last_improvement = t
        elif t - last_improvement > stale_window:
            deadlocked = True
            t += 1
            break
        t += 1

    completed = all(a.arrived for a in agents)
    return SimulationTrace(
        configurations=configurations,
        conflicts=resolved_log,
        collisions=collisions,
        arrival_times={a.id: a.arrival_time for a in agents},
        lines=lines,
        ticks=t,
        completed=completed,
        deadlocked=deadlocked,
        timed_out=timed_out,
        guard_waits=guard_waits,
    )
