"""
Core selectors - ordering and lookup patterns over bids and auction state.
"""

from collections.abc import Iterable, Mapping, Sequence

from apps.core.models import Bid, GroupOrderPolicy

ArrivalSchedule = Mapping[int, Sequence[Bid]]


def density_order(bids: Iterable[Bid]) -> list[Bid]:
    """Bids by ascending cost density, ties by ascending worker id."""
    return sorted(bids, key=lambda bid: (bid.density, bid.worker_id))


def reputation_order(bids: Iterable[Bid], policy: GroupOrderPolicy) -> list[Bid]:
    """
    Bids in the scanning order of a group selection pass.

    Ties are always broken by ascending worker id.
    """
    if policy == GroupOrderPolicy.ASCENDING_REPUTATION:
        return sorted(bids, key=lambda bid: (bid.reputation, bid.worker_id))
    return sorted(bids, key=lambda bid: (-bid.reputation, bid.worker_id))


def bids_declared_at(schedule: ArrivalSchedule, step: int) -> list[Bid]:
    """Bids whose declared arrival is exactly the given step."""
    return list(schedule.get(step, ()))


def bids_declared_up_to(schedule: ArrivalSchedule, step: int) -> list[Bid]:
    """Bids whose declared arrival is at or before the given step."""
    return [bid for s in sorted(schedule) if s <= step for bid in schedule[s]]


def all_bids(schedule: ArrivalSchedule) -> list[Bid]:
    """Every bid in a schedule, in step then submission order."""
    return [bid for s in sorted(schedule) for bid in schedule[s]]


def declared_prices(schedule: ArrivalSchedule) -> dict[int, float]:
    """Map worker id to declared price."""
    return {bid.worker_id: bid.price for bid in all_bids(schedule)}


def find_bid(schedule: ArrivalSchedule, worker_id: int) -> Bid | None:
    for bid in all_bids(schedule):
        if bid.worker_id == worker_id:
            return bid
    return None

