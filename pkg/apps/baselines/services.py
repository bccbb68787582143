"""
Baseline mechanism services.

Offline baselines see every bid before the task and select all winners at
t = 1. Fixed Threshold reuses the online loop with a constant threshold.
"""

from collections.abc import Mapping, Sequence

import structlog

from apps.baselines.models import DEFAULT_FIXED_THRESHOLD, MechanismKind
from apps.common.exceptions import DomainError
from apps.common.random import make_generator
from apps.core.models import AuctionState, Bid, Outcome, TaskConfig, WinnerRecord, WorkerProfile
from apps.core.selectors import ArrivalSchedule, all_bids, density_order
from apps.core.services import build_outcome
from apps.online.models import FirstStepResult, StartDelayed
from apps.online.services import first_step_selection, run_online_auction, run_threshold_auction

logger = structlog.get_logger(__name__)


def _offline_outcome(
    kind: MechanismKind,
    config: TaskConfig,
    winners: list[WinnerRecord],
    bids: Sequence[Bid],
    true_costs: Mapping[int, float] | None,
) -> Outcome:
    costs = {bid.worker_id: bid.price for bid in bids}
    costs.update(true_costs or {})
    outcome = build_outcome(
        mechanism=str(kind),
        winners=winners,
        rounds=config.rounds,
        costs=costs,
    )
    logger.debug(
        "mechanism.finished",
        mechanism=str(kind),
        winners=outcome.n_winners,
        total_paid=outcome.total_paid,
    )
    return outcome


def _first_price_record(bid: Bid, rounds: int) -> WinnerRecord:
    return WinnerRecord(
        worker_id=bid.worker_id,
        selected_step=1,
        payment=rounds * bid.price,
        max_threshold_seen=bid.density,
        reputation=bid.reputation,
    )


def _admit_first_price(ordered: Sequence[Bid], config: TaskConfig) -> list[WinnerRecord]:
    """Scan in order, admitting every bid whose T * b_i still fits the budget."""
    remaining = config.budget
    winners = []
    for bid in ordered:
        cost = config.rounds * bid.price
        if cost <= remaining:
            winners.append(_first_price_record(bid, config.rounds))
            remaining -= cost
    return winners


def run_fixed_threshold(
    config: TaskConfig,
    schedule: ArrivalSchedule,
    fixed_threshold: float = DEFAULT_FIXED_THRESHOLD,
    true_costs: Mapping[int, float] | None = None,
) -> Outcome:
    """
    Online loop with a constant threshold for both groups.

    The first step admits, in density order, every arrived worker with
    rho_i <= threshold whose payment T * Re_i * threshold still fits B_1.

    Raises:
        DomainError: If the threshold is not positive
    """
    if not fixed_threshold > 0:
        raise DomainError(f"Fixed threshold must be positive, got {fixed_threshold}")

    def first_step(arrived: list[Bid], state: AuctionState) -> FirstStepResult | StartDelayed:
        ordered = density_order(arrived)
        state.operations.sort(len(ordered))
        remaining = config.first_round_budget
        payments = {}
        for bid in ordered:
            state.operations.step()
            if bid.density > fixed_threshold:
                break
            payment = config.rounds * bid.reputation * fixed_threshold
            if payment <= remaining:
                payments[bid.worker_id] = payment
                remaining -= payment
        if len(payments) < config.min_workers_to_start:
            return StartDelayed(selected=len(payments), required=config.min_workers_to_start)
        return FirstStepResult(
            winners=tuple(payments),
            threshold=fixed_threshold,
            payments=payments,
        )

    def step_thresholds(state: AuctionState) -> tuple[float, float]:
        return fixed_threshold, fixed_threshold

    return run_threshold_auction(
        config,
        schedule,
        mechanism=str(MechanismKind.FIXED_THRESHOLD),
        first_step=first_step,
        step_thresholds=step_thresholds,
        true_costs=true_costs,
    )


def run_proportional_share(
    config: TaskConfig,
    bids: Sequence[Bid],
    true_costs: Mapping[int, float] | None = None,
) -> Outcome:
    """Offline proportional share over every bid with the full budget B."""
    winners: list[WinnerRecord] = []
    if bids:
        result = first_step_selection(bids, config.budget, config.rounds, min_workers=1)
        if isinstance(result, FirstStepResult):
            reputations = {bid.worker_id: bid.reputation for bid in bids}
            winners = [
                WinnerRecord(
                    worker_id=worker_id,
                    selected_step=1,
                    payment=result.payments[worker_id],
                    max_threshold_seen=result.threshold,
                    reputation=reputations[worker_id],
                )
                for worker_id in result.winners
            ]
    return _offline_outcome(MechanismKind.PROPORTIONAL_SHARE, config, winners, bids, true_costs)


def run_rrafl(
    config: TaskConfig,
    bids: Sequence[Bid],
    true_costs: Mapping[int, float] | None = None,
) -> Outcome:
    """
    Offline next-density threshold mechanism.

    With bids in ascending density order, k is the largest prefix length
    whose winners, paid T * Re_i * rho_{k+1}, fit the budget. When every
    worker fits (T * rho_n * sum Re <= B) the whole set wins at density
    B / (T * sum Re).
    """
    ordered = density_order(bids)
    rounds = config.rounds
    best_k = 0
    best_density = 0.0
    prefix_reputation = 0.0
    for k in range(len(ordered) + 1):
        if k == len(ordered):
            if k and rounds * ordered[-1].density * prefix_reputation <= config.budget:
                best_k = k
                best_density = config.budget / (rounds * prefix_reputation)
            break
        next_density = ordered[k].density
        if next_density * rounds * prefix_reputation <= config.budget:
            best_k = k
            best_density = next_density
        else:
            break
        prefix_reputation += ordered[k].reputation

    winners = [
        WinnerRecord(
            worker_id=bid.worker_id,
            selected_step=1,
            payment=rounds * bid.reputation * best_density,
            max_threshold_seen=best_density,
            reputation=bid.reputation,
        )
        for bid in ordered[:best_k]
    ]
    return _offline_outcome(MechanismKind.RRAFL, config, winners, bids, true_costs)


def run_vanilla(
    config: TaskConfig,
    bids: Sequence[Bid],
    seed: int,
    true_costs: Mapping[int, float] | None = None,
) -> Outcome:
    """Random order, first-price payments while the budget remains."""
    ordered = sorted(bids, key=lambda bid: bid.worker_id)
    permutation = make_generator(seed).permutation(len(ordered))
    shuffled = [ordered[index] for index in permutation]
    winners = _admit_first_price(shuffled, config)
    return _offline_outcome(MechanismKind.VANILLA, config, winners, bids, true_costs)


def run_bid_greedy(
    config: TaskConfig,
    bids: Sequence[Bid],
    true_costs: Mapping[int, float] | None = None,
) -> Outcome:
    """Lowest bids first, first-price payments."""
    ordered = sorted(bids, key=lambda bid: (bid.price, bid.worker_id))
    winners = _admit_first_price(ordered, config)
    return _offline_outcome(MechanismKind.BID_GREEDY, config, winners, bids, true_costs)


def run_approx_optimal(config: TaskConfig, profiles: Sequence[WorkerProfile]) -> Outcome:
    """
    Full-information greedy on reputation per unit true cost.

    Pays every winner exactly T * c_i.
    """
    ordered = sorted(profiles, key=lambda p: (-p.reputation / p.true_cost, p.id))
    remaining = config.budget
    winners = []
    for profile in ordered:
        cost = config.rounds * profile.true_cost
        if cost <= remaining:
            winners.append(
                WinnerRecord(
                    worker_id=profile.id,
                    selected_step=1,
                    payment=cost,
                    max_threshold_seen=profile.true_cost / profile.reputation,
                    reputation=profile.reputation,
                )
            )
            remaining -= cost
    costs = {profile.id: profile.true_cost for profile in profiles}
    outcome = build_outcome(
        mechanism=str(MechanismKind.APPROX_OPTIMAL),
        winners=winners,
        rounds=config.rounds,
        costs=costs,
    )
    logger.debug(
        "mechanism.finished",
        mechanism=str(MechanismKind.APPROX_OPTIMAL),
        winners=outcome.n_winners,
        total_paid=outcome.total_paid,
    )
    return outcome


def run_mechanism(
    kind: MechanismKind,
    config: TaskConfig,
    profiles: Sequence[WorkerProfile],
    schedule: ArrivalSchedule,
    seed: int = 0,
    fixed_threshold: float = DEFAULT_FIXED_THRESHOLD,
) -> Outcome:
    """
    Run any mechanism on one instance.

    Args:
        kind: Mechanism to run
        config: Task configuration
        profiles: Worker truths, used for true costs and Approx. Optimal
        schedule: Declared arrival step -> bids
        seed: Seed for randomized mechanisms
        fixed_threshold: Threshold of the Fixed Threshold mechanism

    Returns:
        Outcome

    Raises:
        DomainError: If the mechanism is unknown or a worker truly arrives after T
    """
    try:
        kind = MechanismKind(kind)
    except ValueError as exc:
        raise DomainError(f"Unknown mechanism: {kind}") from exc
    late = sorted(profile.id for profile in profiles if profile.true_arrival > config.rounds)
    if late:
        raise DomainError(f"Workers {late} arrive after step {config.rounds}")

    true_costs = {profile.id: profile.true_cost for profile in profiles}
    # offline kinds see every declared bid at t = 1
    bids = all_bids(schedule) if kind.is_offline else []

    if kind == MechanismKind.ONLINE:
        return run_online_auction(config, schedule, true_costs=true_costs)
    if kind == MechanismKind.FIXED_THRESHOLD:
        return run_fixed_threshold(config, schedule, fixed_threshold, true_costs=true_costs)
    if kind == MechanismKind.RRAFL:
        return run_rrafl(config, bids, true_costs=true_costs)
    if kind == MechanismKind.VANILLA:
        return run_vanilla(config, bids, seed, true_costs=true_costs)
    if kind == MechanismKind.BID_GREEDY:
        return run_bid_greedy(config, bids, true_costs=true_costs)
    if kind == MechanismKind.PROPORTIONAL_SHARE:
        return run_proportional_share(config, bids, true_costs=true_costs)
    if kind == MechanismKind.APPROX_OPTIMAL:
        return run_approx_optimal(config, profiles)
    raise DomainError(f"Unknown mechanism: {kind}")
