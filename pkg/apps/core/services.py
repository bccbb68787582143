"""
Core services - closed-form formulas shared by every mechanism.
"""

from collections.abc import Iterable, Mapping

from apps.common.exceptions import DomainError
from apps.core.models import Outcome, WinnerRecord, group_of


def cost_density(bid_price: float, reputation: float) -> float:
    """
    Bid price per unit reputation.

    Raises:
        DomainError: If reputation is not positive
    """
    if not reputation > 0:
        raise DomainError(f"Reputation must be positive, got {reputation}")
    return bid_price / reputation


def worker_utility(record: WinnerRecord | None, true_cost: float, rounds: int) -> float:
    """
    Utility of a worker after the task.

    Zero for unselected workers, otherwise the payment minus the true cost
    of every round the worker took part in.
    """
    if record is None:
        return 0.0
    return record.payment - true_cost * (rounds - record.selected_step + 1)


def publisher_utility(winners: Iterable[WinnerRecord], rounds: int) -> float:
    """Reputation-weighted participation summed over the winners."""
    return sum(
        record.reputation * (rounds - record.selected_step + 1) for record in winners
    )


def unit_payment_utility(utility: float, total_paid: float) -> float:
    """Publisher utility per unit of money paid; 0 when nothing was paid."""
    if total_paid <= 0:
        return 0.0
    return utility / total_paid


def build_outcome(
    *,
    mechanism: str,
    winners: Iterable[WinnerRecord],
    rounds: int,
    costs: Mapping[int, float],
    started: bool = True,
    start_delay: int = 0,
    budget_constrained: bool = False,
    enforces_group_caps: bool = False,
    cap_rejected: Iterable[int] = (),
    threshold_history: Iterable[tuple[int, float, float]] = (),
    operations: int = 0,
) -> Outcome:
    """
    Assemble an Outcome and evaluate every utility.

    Args:
        mechanism: Mechanism id recorded on the outcome
        winners: Final winner records
        rounds: Number of global iterations T
        costs: True cost per worker id for every participant; unselected
            participants get a zero utility entry
        started: False when the task never started
        start_delay: Number of steps the start was delayed
        budget_constrained: Whether a group budget cap comparison fired
        enforces_group_caps: Whether the mechanism splits the budget in two
            parity groups of B/2
        cap_rejected: Worker ids rejected by a group cap at least once
        threshold_history: (step, threshold applied to U_1, threshold applied to U_2)
        operations: Elementary selection operations performed

    Returns:
        Outcome instance
    """
    records = tuple(sorted(winners, key=lambda record: record.worker_id))
    by_id = {record.worker_id: record for record in records}
    total_paid = sum(record.payment for record in records)
    utility = publisher_utility(records, rounds)

    group_payments = [0.0, 0.0]
    for record in records:
        group_payments[group_of(record.worker_id)] += record.payment

    utilities = {
        worker_id: worker_utility(by_id.get(worker_id), cost, rounds)
        for worker_id, cost in sorted(costs.items())
    }
    for record in records:
        if record.worker_id not in utilities:
            raise DomainError(f"No cost known for winner {record.worker_id}")

    return Outcome(
        mechanism=mechanism,
        rounds=rounds,
        winners=records,
        total_paid=total_paid,
        publisher_utility=utility,
        unit_payment_utility=unit_payment_utility(utility, total_paid),
        worker_utilities=utilities,
        started=started,
        start_delay=start_delay,
        budget_constrained=budget_constrained,
        enforces_group_caps=enforces_group_caps,
        group_payments=(group_payments[0], group_payments[1]),
        cap_rejected=frozenset(cap_rejected),
        threshold_history=tuple(threshold_history),
        operations=operations,
    )
