"""Turn-order auction for conflict resolution.

Contenders over a shared cell submit bids; the allocation rule sorts them by
descending bid and assigns passage turns, the payment rule charges each
winner the externality it imposes on lower-turn agents, and bidding one's
true incentive is a dominant strategy. All money arithmetic is exact
(fractions.Fraction), so the mechanism's properties can be asserted without
tolerances.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Mapping, Optional, Sequence


def as_fraction(x) -> Fraction:
    if isinstance(x, Rational):
        return Fraction(x)
    # floats convert exactly (binary value), keeping the pipeline deterministic
    return Fraction(x)


@dataclass(frozen=True)
class Bid:
    agent_id: int
    amount: Fraction
    arrival: int = 0  # tick the agent first contended for the cell; tie-break only

    def __post_init__(self):
        object.__setattr__(self, "amount", as_fraction(self.amount))
        if self.amount < 0:
            raise ValueError("bid amounts must be nonnegative")


@dataclass(frozen=True)
class RewardSchedule:
    """Strictly decreasing positive per-turn rewards alpha_1 > alpha_2 > ... > 0."""

    alphas: tuple[Fraction, ...]

    def __post_init__(self):
        alphas = tuple(as_fraction(a) for a in self.alphas)
        object.__setattr__(self, "alphas", alphas)
        if not alphas:
            raise ValueError("schedule must be nonempty")
        if any(a <= 0 for a in alphas):
            raise ValueError("rewards must be positive")
        if any(a <= b for a, b in zip(alphas, alphas[1:])):
            raise ValueError("rewards must be strictly decreasing")

    def __len__(self) -> int:
        return len(self.alphas)

    def alpha(self, q: int) -> Fraction:
        """Reward for turn q (1-based); 0 past the last turn."""
        if q < 1:
            raise ValueError("turn index must be >= 1")
        if q > len(self.alphas):
            return Fraction(0)
        return self.alphas[q - 1]


def harmonic_schedule(k: int) -> RewardSchedule:
    """Default schedule alpha_q = 1/q for k turns."""
    if k < 1:
        raise ValueError("need at least one turn")
    return RewardSchedule(tuple(Fraction(1, q) for q in range(1, k + 1)))


def delay_schedule(k: int, head_start: int) -> RewardSchedule:
    """Alternative schedule alpha_q = 1/(d + q - 1), d = winner's remaining distance."""
    if head_start < 1:
        raise ValueError("head_start must be >= 1")
    return RewardSchedule(tuple(Fraction(1, head_start + q - 1) for q in range(1, k + 1)))


@dataclass(frozen=True)
class AuctionOutcome:
    ordering: dict[int, int]          # agent_id -> turn (1-based)
    payments: dict[int, Fraction]     # agent_id -> h_i
    utilities: dict[int, Fraction]    # agent_id -> Phi_i at true values
    welfare: Fraction

    def turn_order(self) -> list[int]:
        return [aid for aid, _ in sorted(self.ordering.items(), key=lambda kv: kv[1])]


def allocate(bids: Sequence[Bid]) -> dict[int, int]:
    """Turn permutation: q-th highest bid gets turn q.

    Ties go to the earlier-arriving contender, then to the lower agent id.
    """
    if not bids:
        raise ValueError("cannot allocate with no bids")
    ranked = sorted(bids, key=lambda b: (-b.amount, b.arrival, b.agent_id))
    return {b.agent_id: q for q, b in enumerate(ranked, start=1)}


def payment(amounts_sorted_desc: Sequence[Fraction], q: int, schedule: RewardSchedule) -> Fraction:
    """Charge for turn q: sum_{j=q..k} b_{j+1} (alpha_j - alpha_{j+1}).

    Boundary convention b_{k+1} = 0, alpha_{k+1} = 0, so the last turn pays 0.
    """
    k = len(amounts_sorted_desc)
    if not 1 <= q <= k:
        raise ValueError(f"turn {q} out of range for {k} bids")
    total = Fraction(0)
    for j in range(q, k + 1):
        b_next = as_fraction(amounts_sorted_desc[j]) if j < k else Fraction(0)
        total += b_next * (schedule.alpha(j) - schedule.alpha(j + 1))
    return total


def utility(value, q: int, pay, schedule: RewardSchedule) -> Fraction:
    return as_fraction(value) * schedule.alpha(q) - as_fraction(pay)


def run_auction(
    bids: Sequence[Bid],
    schedule: Optional[RewardSchedule] = None,
    true_values: Optional[Mapping[int, Fraction]] = None,
) -> AuctionOutcome:
    """Full mechanism: allocation, payments, and true-value utilities.

    true_values defaults to the bid amounts (the truthful case). Welfare is
    always evaluated at true values.
    """
    if len(bids) < 2:
        raise ValueError("auction needs at least two contenders")
    if schedule is None:
        schedule = harmonic_schedule(len(bids))
    if len(schedule) < len(bids):
        raise ValueError("schedule shorter than contender count")
    ordering = allocate(bids)
    amounts = sorted((b.amount for b in bids), reverse=True)
    values = dict(true_values) if true_values is not None else {b.agent_id: b.amount for b in bids}
    payments = {aid: payment(amounts, q, schedule) for aid, q in ordering.items()}
    utilities = {
        aid: utility(values[aid], q, payments[aid], schedule) for aid, q in ordering.items()
    }
    welfare = sum(
        (as_fraction(values[aid]) * schedule.alpha(q) for aid, q in ordering.items()),
        Fraction(0),
    )
    return AuctionOutcome(ordering=ordering, payments=payments, utilities=utilities, welfare=welfare)


def sweep_utilities(
    bids: Sequence[Bid],
    focal_agent: int,
    bid_grid: Iterable,
    schedule: Optional[RewardSchedule] = None,
    true_value=None,
) -> list[tuple[Fraction, Fraction]]:
    """Utility curve for one agent as its bid varies, others held fixed.

    The focal agent's true value defaults to its listed bid amount (others
    are assumed truthful). Returns (bid, utility) points for plotting.
    """
    by_id = {b.agent_id: b for b in bids}
    if focal_agent not in by_id:
        raise ValueError(f"agent {focal_agent} not among bidders")
    grid = [as_fraction(x) for x in bid_grid]
    if not grid:
        raise ValueError("bid grid is empty")
    value = as_fraction(true_value) if true_value is not None else by_id[focal_agent].amount
    values = {b.agent_id: b.amount for b in bids}
    values[focal_agent] = value
    if len(bids) == 1:
        # degenerate single-contender case: no auction, flat curve at full reward
        sched = schedule if schedule is not None else harmonic_schedule(1)
        return [(x, value * sched.alpha(1)) for x in grid]
    curve = []
    for x in grid:
        trial_bids = [
            Bid(b.agent_id, x if b.agent_id == focal_agent else b.amount, b.arrival) for b in bids
        ]
        outcome = run_auction(trial_bids, schedule=schedule, true_values=values)
        curve.append((x, outcome.utilities[focal_agent]))
    return curve
