"""
Online mechanism services.

Implements threshold learning on a sample set, the per-group selection and
top-up pass, the offline first-step selection and the full online auction
across T global iterations. Groups are partitioned by worker id parity and
each group is priced with the threshold learned from the other group.
"""

from collections.abc import Callable, Mapping, Sequence

import structlog

from apps.common.exceptions import DomainError
from apps.core.models import (
    AuctionState,
    Bid,
    OperationCounter,
    Outcome,
    TaskConfig,
    WinnerRecord,
)
from apps.core.selectors import (
    ArrivalSchedule,
    bids_declared_at,
    bids_declared_up_to,
    declared_prices,
    density_order,
    reputation_order,
)
from apps.core.services import build_outcome
from apps.online.models import FirstStepResult, PaymentRule, StartDelayed, ThresholdResult

logger = structlog.get_logger(__name__)

FirstStepRule = Callable[[list[Bid], AuctionState], FirstStepResult | StartDelayed]
StepThresholdRule = Callable[[AuctionState], tuple[float, float]]


def _greedy_share(ordered: Sequence[Bid], budget: float, rounds: int) -> tuple[int, float]:
    """
    Longest density-ordered prefix meeting the proportional share rule.

    Admits worker i while rounds * rho_i <= budget / (Re_i + sum of admitted Re).

    Returns:
        (number admitted, their total reputation)
    """
    total = 0.0
    k = 0
    for bid in ordered:
        if rounds * bid.density <= budget / (bid.reputation + total):
            total += bid.reputation
            k += 1
        else:
            break
    return k, total


def get_payment_density_threshold(
    sample_budget: float,
    sample_set: Sequence[Bid],
    empty_sample_threshold: float = 0.0,
    counter: OperationCounter | None = None,
) -> ThresholdResult:
    """
    Learn a payment density threshold from a sample set.

    Args:
        sample_budget: Budget B' the sample is priced against
        sample_set: Bids forming the sample U'
        empty_sample_threshold: Threshold returned when nobody is affordable
        counter: Optional operation counter

    Returns:
        ThresholdResult with the threshold, k and the admitted sample ids

    Raises:
        DomainError: If the sample budget is negative
    """
    if sample_budget < 0:
        raise DomainError(f"Sample budget must be non-negative, got {sample_budget}")

    ordered = density_order(sample_set)
    k, total = _greedy_share(ordered, sample_budget, rounds=1)
    if counter is not None:
        counter.sort(len(ordered))
        counter.step(k + 1)

    if k == 0:
        threshold = empty_sample_threshold
    elif k == len(ordered):
        threshold = sample_budget / total
    else:
        threshold = min(sample_budget / total, ordered[k].density)

    return ThresholdResult(
        threshold=threshold,
        selected_sample_count=k,
        sample_winner_set=tuple(bid.worker_id for bid in ordered[:k]),
    )


def first_step_selection(
    arrived_bids: Sequence[Bid],
    first_round_budget: float,
    rounds: int,
    min_workers: int,
    counter: OperationCounter | None = None,
    payment_rule: PaymentRule = PaymentRule.THRESHOLD,
) -> FirstStepResult | StartDelayed:
    """
    Offline proportional share selection at the first time step.

    Args:
        arrived_bids: Every bid present when the task starts
        first_round_budget: B_1
        rounds: T
        min_workers: Workers needed to start the task
        counter: Optional operation counter
        payment_rule: Threshold payments, or first-price for the negative control

    Returns:
        FirstStepResult, or StartDelayed when fewer than min_workers are admitted
    """
    if not arrived_bids:
        return StartDelayed(selected=0, required=min_workers)

    ordered = density_order(arrived_bids)
    k, total = _greedy_share(ordered, first_round_budget, rounds)
    if counter is not None:
        counter.sort(len(ordered))
        counter.step(k + 1)

    if k == 0 or k < min_workers:
        return StartDelayed(selected=k, required=min_workers)

    if k == len(ordered):
        threshold = first_round_budget / total / rounds
    else:
        threshold = min(first_round_budget / total, rounds * ordered[k].density) / rounds

    winners = ordered[:k]
    if payment_rule == PaymentRule.FIRST_PRICE:
        payments = {bid.worker_id: rounds * bid.price for bid in winners}
    else:
        payments = {bid.worker_id: rounds * bid.reputation * threshold for bid in winners}

    return FirstStepResult(
        winners=tuple(bid.worker_id for bid in winners),
        threshold=threshold,
        payments=payments,
    )


def sample_budget_at(budget: float, first_round_budget: float, rounds: int, step: int) -> float:
    """
    Sample budget B' used to learn thresholds at a later step.

    Grows linearly from B_1 / T towards B / T at the last step.

    Raises:
        DomainError: If step is outside 2..T
    """
    if not 2 <= step <= rounds:
        raise DomainError(f"Step must lie in 2..{rounds}, got {step}")
    return (first_round_budget + (budget - first_round_budget) * (step - 1) / (rounds - 1)) / rounds


def select_workers_from_group(
    group: Sequence[Bid],
    threshold: float,
    state: AuctionState,
    step: int,
    payment_rule: PaymentRule = PaymentRule.THRESHOLD,
) -> AuctionState:
    """
    Admit and top up workers of one group against a threshold.

    Unselected workers at or below the threshold are admitted while the
    group's B/2 budget allows; selected workers whose running maximum
    threshold is below the new one have their payment raised, truncated at
    the group budget. Ledgers are updated after every admission or top-up.

    Args:
        group: Bids of one parity group
        threshold: Threshold learned from the other group
        state: Auction state, mutated in place
        step: Current time step t
        payment_rule: Threshold payments, or first-price for the negative control

    Returns:
        The mutated state

    Raises:
        DomainError: If step is outside 2..T or the threshold is negative
    """
    config = state.config
    if not 2 <= step <= config.rounds:
        raise DomainError(f"Step must lie in 2..{config.rounds}, got {step}")
    if threshold < 0:
        raise DomainError(f"Threshold must be non-negative, got {threshold}")
    if not group:
        return state

    group_id = group[0].group_id
    remaining_rounds = config.rounds - step + 1
    ordered = reputation_order(group, config.group_order_policy)
    state.operations.sort(len(ordered))

    for bid in ordered:
        state.operations.step()
        if bid.density > threshold:
            continue

        record = state.winners.get(bid.worker_id)
        if record is None:
            if payment_rule == PaymentRule.FIRST_PRICE:
                payment = remaining_rounds * bid.price
            else:
                payment = remaining_rounds * bid.reputation * threshold
            if payment <= state.remaining_group_budget(group_id):
                state.set_winner(
                    WinnerRecord(
                        worker_id=bid.worker_id,
                        selected_step=step,
                        payment=payment,
                        max_threshold_seen=threshold,
                        reputation=bid.reputation,
                    )
                )
            else:
                state.budget_constrained = True
                state.cap_rejected.add(bid.worker_id)
            continue

        if payment_rule == PaymentRule.FIRST_PRICE:
            continue
        raised = record.payment + (
            (threshold - record.max_threshold_seen) * bid.reputation * remaining_rounds
        )
        if raised <= record.payment:
            continue
        cap = state.remaining_group_budget(group_id) + record.payment
        if raised > cap:
            state.budget_constrained = True
            raised = cap
        if raised > record.payment:
            state.set_winner(
                WinnerRecord(
                    worker_id=record.worker_id,
                    selected_step=record.selected_step,
                    payment=raised,
                    max_threshold_seen=threshold,
                    reputation=record.reputation,
                )
            )

    return state


def run_threshold_auction(
    config: TaskConfig,
    schedule: ArrivalSchedule,
    *,
    mechanism: str,
    first_step: FirstStepRule,
    step_thresholds: StepThresholdRule,
    true_costs: Mapping[int, float] | None = None,
    payment_rule: PaymentRule = PaymentRule.THRESHOLD,
) -> Outcome:
    """
    Drive an online auction across T steps with pluggable threshold rules.

    The first step is retried with one more step of arrivals per delay until
    it admits enough workers; after T - 1 delays the task never starts. With
    delay d, task step t receives the bids declared at step t + d.

    Args:
        config: Task configuration
        schedule: Declared arrival step -> bids
        mechanism: Id recorded on the outcome
        first_step: Selection rule for the first step
        step_thresholds: Returns the thresholds applied to U_1 and U_2 at state.current_step
        true_costs: True cost per worker; declared prices stand in when absent
        payment_rule: Payment rule for later-step admissions

    Returns:
        Outcome with every participant's utility
    """
    costs = {**declared_prices(schedule), **(true_costs or {})}
    state = AuctionState(config=config)
    log = logger.bind(
        mechanism=mechanism,
        budget=config.budget,
        rounds=config.rounds,
        group_order_policy=str(config.group_order_policy),
    )
    log.debug("auction.started")

    delay = 0
    while True:
        arrived = bids_declared_up_to(schedule, 1 + delay)
        result = first_step(arrived, state)
        if isinstance(result, FirstStepResult):
            break
        if delay >= config.rounds - 1:
            log.info("auction.never_started", delay=delay, selected=result.selected)
            return build_outcome(
                mechanism=mechanism,
                winners=(),
                rounds=config.rounds,
                costs=costs,
                started=False,
                start_delay=delay,
                operations=state.operations.count,
            )
        delay += 1
        log.debug("auction.start_delayed", delay=delay, selected=result.selected)

    by_id = {bid.worker_id: bid for bid in arrived}
    for bid in arrived:
        state.add_bid(bid)
    for worker_id in result.winners:
        state.set_winner(
            WinnerRecord(
                worker_id=worker_id,
                selected_step=1,
                payment=result.payments[worker_id],
                max_threshold_seen=result.threshold,
                reputation=by_id[worker_id].reputation,
            )
        )
    state.threshold_history.append((1, result.threshold, result.threshold))

    for step in range(2, config.rounds + 1):
        state.current_step = step
        for bid in bids_declared_at(schedule, step + delay):
            state.add_bid(bid)
        applied_1, applied_2 = step_thresholds(state)
        state.threshold_history.append((step, applied_1, applied_2))
        select_workers_from_group(state.group_1, applied_1, state, step, payment_rule)
        select_workers_from_group(state.group_2, applied_2, state, step, payment_rule)
        log.debug(
            "auction.step_completed",
            step=step,
            winners=len(state.winners),
            group_paid=tuple(state.group_paid),
        )

    outcome = build_outcome(
        mechanism=mechanism,
        winners=state.winners.values(),
        rounds=config.rounds,
        costs=costs,
        start_delay=delay,
        budget_constrained=state.budget_constrained,
        enforces_group_caps=True,
        cap_rejected=state.cap_rejected,
        threshold_history=state.threshold_history,
        operations=state.operations.count,
    )
    log.debug(
        "auction.finished",
        winners=outcome.n_winners,
        total_paid=outcome.total_paid,
        utility=outcome.publisher_utility,
    )
    return outcome


def run_online_auction(
    config: TaskConfig,
    schedule: ArrivalSchedule,
    true_costs: Mapping[int, float] | None = None,
    payment_rule: PaymentRule = PaymentRule.THRESHOLD,
) -> Outcome:
    """
    Run the online selection and payment mechanism.

    At t = 1 the arrived workers go through proportional share selection
    with budget B_1. At every later step each group learns a threshold from
    half the sample budget and that threshold prices the other group.

    Args:
        config: Task configuration
        schedule: Declared arrival step -> bids
        true_costs: True cost per worker; declared prices stand in when absent
        payment_rule: PaymentRule.FIRST_PRICE builds the broken negative control

    Returns:
        Outcome
    """

    def first_step(arrived: list[Bid], state: AuctionState) -> FirstStepResult | StartDelayed:
        return first_step_selection(
            arrived,
            config.first_round_budget,
            config.rounds,
            config.min_workers_to_start,
            counter=state.operations,
            payment_rule=payment_rule,
        )

    def step_thresholds(state: AuctionState) -> tuple[float, float]:
        sample_budget = sample_budget_at(
            config.budget, config.first_round_budget, config.rounds, state.current_step
        )
        learned_1 = get_payment_density_threshold(
            sample_budget / 2, state.group_1, config.empty_sample_threshold, state.operations
        )
        learned_2 = get_payment_density_threshold(
            sample_budget / 2, state.group_2, config.empty_sample_threshold, state.operations
        )
        # cross pricing: U_1 is priced by U_2's sample and vice versa
        return learned_2.threshold, learned_1.threshold

    mechanism = "online" if payment_rule == PaymentRule.THRESHOLD else "broken_first_price"
    return run_threshold_auction(
        config,
        schedule,
        mechanism=mechanism,
        first_step=first_step,
        step_thresholds=step_thresholds,
        true_costs=true_costs,
        payment_rule=payment_rule,
    )
