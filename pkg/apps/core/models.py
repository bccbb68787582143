"""
Core domain models for fedauction.

Value objects are immutable; AuctionState is the single mutable record a
mechanism owns while it runs.
"""

import math
from dataclasses import dataclass, field

from django.db import models
from pydantic import BaseModel, ConfigDict, Field

from apps.common.exceptions import DomainError

GROUP_COUNT = 2
# step-one payments are not split by group, so B_1 must fit in either group's B/2
MAX_FIRST_ROUND_RATIO = 1 / GROUP_COUNT


def group_of(worker_id: int) -> int:
    """Group index of a worker: 0 for U_1 (even ids), 1 for U_2 (odd ids)."""
    return worker_id % GROUP_COUNT


class GroupOrderPolicy(models.TextChoices):
    """Order in which a group is scanned when selecting workers."""

    ASCENDING_REPUTATION = "ascending_reputation", "Ascending reputation"
    DESCENDING_REPUTATION = "descending_reputation", "Descending reputation"


class WorkerProfile(BaseModel):
    """A worker's private truth plus the public reputation."""

    model_config = ConfigDict(frozen=True)

    id: int = Field(ge=0)
    true_cost: float = Field(gt=0, description="Cost per global iteration")
    true_arrival: int = Field(ge=1)
    reputation: float = Field(gt=0, le=1)
    internal_quality: float = Field(ge=0, le=1)


@dataclass(frozen=True, slots=True)
class Bid:
    """
    A sealed bid as the publisher sees it.

    The publisher always pairs a bid with the bidder's public reputation, so
    the reputation travels with the bid and the cost density is fixed at
    construction.
    """

    worker_id: int
    declared_arrival: int
    price: float
    reputation: float
    density: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.worker_id < 0:
            raise DomainError(f"Worker id must be non-negative, got {self.worker_id}")
        if self.declared_arrival < 1:
            raise DomainError(f"Declared arrival must be >= 1, got {self.declared_arrival}")
        if not self.price > 0:
            raise DomainError(f"Bid price must be positive, got {self.price}")
        if not 0 < self.reputation <= 1:
            raise DomainError(f"Reputation must lie in (0, 1], got {self.reputation}")
        object.__setattr__(self, "density", self.price / self.reputation)

    @property
    def group_id(self) -> int:
        return group_of(self.worker_id)


class TaskConfig(BaseModel):
    """Publisher-side parameters of one federated learning task."""

    model_config = ConfigDict(frozen=True)

    budget: float = Field(ge=0)
    rounds: int = Field(ge=2)
    first_round_ratio: float = Field(default=0.35, gt=0, le=MAX_FIRST_ROUND_RATIO)
    min_workers_to_start: int = Field(default=1, ge=1)
    group_order_policy: GroupOrderPolicy = GroupOrderPolicy.DESCENDING_REPUTATION
    empty_sample_threshold: float = Field(default=0.0, ge=0)

    @property
    def first_round_budget(self) -> float:
        return self.budget * self.first_round_ratio

    @property
    def group_budget(self) -> float:
        return self.budget / GROUP_COUNT

    def scaled(self, multiplier: float) -> "TaskConfig":
        """Copy of this config with the budget multiplied."""
        return self.model_copy(update={"budget": self.budget * multiplier})


@dataclass(frozen=True, slots=True)
class WinnerRecord:
    """Selection and payment state of one winning worker."""

    worker_id: int
    selected_step: int
    payment: float
    max_threshold_seen: float
    reputation: float


@dataclass
class OperationCounter:
    """Counts elementary selection operations (comparisons and sort work)."""

    count: int = 0

    def sort(self, n: int) -> None:
        if n > 1:
            self.count += n * math.ceil(math.log2(n))

    def step(self, n: int = 1) -> None:
        self.count += n


@dataclass
class AuctionState:
    """
    The publisher's evolving view of one auction.

    group_paid mirrors the per-group sum of the payments ledger so the B/2
    comparisons do not rescan the group.
    """

    config: TaskConfig
    groups: tuple[list[Bid], list[Bid]] = field(default_factory=lambda: ([], []))
    winners: dict[int, WinnerRecord] = field(default_factory=dict)
    payments: dict[int, float] = field(default_factory=dict)
    group_paid: list[float] = field(default_factory=lambda: [0.0, 0.0])
    current_step: int = 1
    budget_constrained: bool = False
    cap_rejected: set[int] = field(default_factory=set)
    threshold_history: list[tuple[int, float, float]] = field(default_factory=list)
    operations: OperationCounter = field(default_factory=OperationCounter)

    @property
    def group_1(self) -> list[Bid]:
        return self.groups[0]

    @property
    def group_2(self) -> list[Bid]:
        return self.groups[1]

    def add_bid(self, bid: Bid) -> None:
        """Place a bid in its parity group with a zero ledger entry."""
        self.groups[bid.group_id].append(bid)
        self.payments.setdefault(bid.worker_id, 0.0)

    def remaining_group_budget(self, group_id: int) -> float:
        return self.config.group_budget - self.group_paid[group_id]

    def set_winner(self, record: WinnerRecord) -> None:
        """Insert or replace a winner record and keep both ledgers in step."""
        previous = self.payments.get(record.worker_id, 0.0)
        self.winners[record.worker_id] = record
        self.payments[record.worker_id] = record.payment
        self.group_paid[group_of(record.worker_id)] += record.payment - previous


@dataclass(frozen=True)
class Outcome:
    """Final result of running one mechanism on one instance."""

    mechanism: str
    rounds: int
    winners: tuple[WinnerRecord, ...]
    total_paid: float
    publisher_utility: float
    unit_payment_utility: float
    worker_utilities: dict[int, float]
    started: bool = True
    start_delay: int = 0
    budget_constrained: bool = False
    enforces_group_caps: bool = False
    group_payments: tuple[float, float] = (0.0, 0.0)
    cap_rejected: frozenset[int] = frozenset()
    threshold_history: tuple[tuple[int, float, float], ...] = ()
    operations: int = 0

    @property
    def n_winners(self) -> int:
        return len(self.winners)

    @property
    def payments(self) -> dict[int, float]:
        return {record.worker_id: record.payment for record in self.winners}

    def record_for(self, worker_id: int) -> WinnerRecord | None:
        for record in self.winners:
            if record.worker_id == worker_id:
                return record
        return None
