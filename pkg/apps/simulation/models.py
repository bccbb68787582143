"""
Simulation models for fedauction.
"""

import math
from dataclasses import dataclass, field

from django.db import models
from pydantic import BaseModel, ConfigDict, Field, model_validator

from apps.common.random import harmonic_arrival_probabilities
from apps.core.models import Bid, Outcome, WorkerProfile

DEFAULT_QUALITY_LEVELS = (1.0, 0.7, 0.4, 0.1)
DEFAULT_QUALITY_COUNTS = (15, 5, 5, 5)
MIN_REPUTATION = 1e-6


class ReputationLaw(models.TextChoices):
    UNIFORM = "uniform", "Re ~ U[0, 1]"
    POLICY_PRIOR = "policy_prior", "Drawn from the reputation policy prior"


class BidLaw(models.TextChoices):
    REPUTATION_LINEAR = "reputation_linear", "b ~ U[Re/3 + 1/15, Re/3 + 4/15]"
    QUALITY_LINEAR = "quality_linear", "b ~ U[q/3 + 1/15, q/3 + 4/15]"


class QualityLaw(models.TextChoices):
    REPUTATION_WINDOW = "reputation_window", "q ~ U[max(0, Re - 0.1), min(1, Re + 0.1)]"
    LEVELS = "levels", "Fixed data accuracy levels"


class ReputationPolicyKind(models.TextChoices):
    EMA = "ema", "Exponential moving average"
    IDENTITY = "identity", "Reputation never changes"


class PopulationSpec(BaseModel):
    """How a synthetic worker population is generated."""

    model_config = ConfigDict(frozen=True)

    count: int = Field(gt=0)
    rounds: int = Field(ge=2)
    reputation_law: ReputationLaw = ReputationLaw.UNIFORM
    bid_law: BidLaw = BidLaw.REPUTATION_LINEAR
    quality_law: QualityLaw = QualityLaw.REPUTATION_WINDOW
    quality_levels: tuple[float, ...] = DEFAULT_QUALITY_LEVELS
    quality_counts: tuple[int, ...] = DEFAULT_QUALITY_COUNTS
    arrival_law: tuple[float, ...]

    @model_validator(mode="after")
    def check_laws(self) -> "PopulationSpec":
        if len(self.arrival_law) != self.rounds:
            raise ValueError("arrival_law must have one probability per step")
        if any(p < 0 for p in self.arrival_law):
            raise ValueError("arrival probabilities must be non-negative")
        if not math.isclose(sum(self.arrival_law), 1.0, abs_tol=1e-9):
            raise ValueError("arrival probabilities must sum to 1")
        if self.quality_law == QualityLaw.LEVELS:
            if len(self.quality_levels) != len(self.quality_counts):
                raise ValueError("quality_levels and quality_counts differ in length")
            if any(count < 0 for count in self.quality_counts):
                raise ValueError("quality_counts must be non-negative")
            if sum(self.quality_counts) != self.count:
                raise ValueError("count must equal the sum of quality_counts")
        return self

    @classmethod
    def uniform(cls, count: int, rounds: int) -> "PopulationSpec":
        """Population of the budget and worker-count sweeps."""
        return cls(
            count=count,
            rounds=rounds,
            arrival_law=tuple(harmonic_arrival_probabilities(rounds)),
        )

    @classmethod
    def quality_mix(
        cls,
        counts: tuple[int, ...],
        rounds: int,
        levels: tuple[float, ...] = DEFAULT_QUALITY_LEVELS,
    ) -> "PopulationSpec":
        """Population of fixed data accuracy levels."""
        return cls(
            count=sum(counts),
            rounds=rounds,
            reputation_law=ReputationLaw.POLICY_PRIOR,
            bid_law=BidLaw.QUALITY_LINEAR,
            quality_law=QualityLaw.LEVELS,
            quality_levels=levels,
            quality_counts=counts,
            arrival_law=tuple(harmonic_arrival_probabilities(rounds)),
        )


class TaskSequenceSpec(BaseModel):
    """A sequence of tasks over one population with reputation carried across."""

    model_config = ConfigDict(frozen=True)

    num_tasks: int = Field(default=70, gt=0)
    warmup_tasks: int = Field(default=5, ge=0)
    reputation_update: ReputationPolicyKind = ReputationPolicyKind.EMA
    reputation_alpha: float = Field(default=0.3, gt=0, le=1)
    budget: float = Field(default=80.0, ge=0)

    @model_validator(mode="after")
    def check_warmup(self) -> "TaskSequenceSpec":
        if self.warmup_tasks >= self.num_tasks:
            raise ValueError("warmup_tasks must be smaller than num_tasks")
        return self


@dataclass(frozen=True)
class Population:
    """Worker truths with the truthful bids they submit."""

    profiles: tuple[WorkerProfile, ...]
    bids: tuple[Bid, ...]

    @property
    def schedule(self) -> dict[int, list[Bid]]:
        """Declared arrival step -> bids, in worker id order."""
        schedule: dict[int, list[Bid]] = {}
        for bid in sorted(self.bids, key=lambda bid: bid.worker_id):
            schedule.setdefault(bid.declared_arrival, []).append(bid)
        return schedule

    @property
    def true_costs(self) -> dict[int, float]:
        return {profile.id: profile.true_cost for profile in self.profiles}

    def profile(self, worker_id: int) -> WorkerProfile:
        for profile in self.profiles:
            if profile.id == worker_id:
                return profile
        raise KeyError(worker_id)


@dataclass
class TaskSequenceResult:
    """Per-task outcomes of a task sequence and the quality metric."""

    mechanism: str
    outcomes: list[Outcome | None] = field(default_factory=list)
    proportions: list[float | None] = field(default_factory=list)
    warmup_tasks: int = 0
    final_reputations: dict[int, float] = field(default_factory=dict)

    @property
    def scored_proportions(self) -> list[float]:
        return [
            proportion for proportion in self.proportions[self.warmup_tasks:]
            if proportion is not None
        ]

    @property
    def tasks_scored(self) -> int:
        return len(self.scored_proportions)

    @property
    def mean_proportion(self) -> float | None:
        scored = self.scored_proportions
        if not scored:
            return None
        return sum(scored) / len(scored)
