"""
Experiment models - the scenario file schema and CSV row types.
"""

from dataclasses import astuple, dataclass, fields

from django.db import models
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from apps.baselines.models import DEFAULT_FIXED_THRESHOLD, MechanismKind
from apps.core.models import MAX_FIRST_ROUND_RATIO, GroupOrderPolicy, TaskConfig
from apps.simulation.models import (
    DEFAULT_QUALITY_COUNTS,
    DEFAULT_QUALITY_LEVELS,
    PopulationSpec,
    ReputationPolicyKind,
    TaskSequenceSpec,
)


class PopulationKind(models.TextChoices):
    UNIFORM = "uniform", "Uniform reputations"
    QUALITY_MIX = "quality_mix", "Fixed data accuracy levels"


class SweepParameter(models.TextChoices):
    BUDGET = "budget", "Budget"
    WORKERS = "workers", "Number of workers"


def _split(value: object) -> object:
    """Turn a comma-separated string into a list of stripped items."""
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


class ScenarioConfig(BaseModel):
    """
    One experiment scenario as read from a KEY=value file.

    List-valued keys take comma-separated values.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    mechanisms: tuple[MechanismKind, ...] = Field(default=(MechanismKind.ONLINE,), min_length=1)
    seeds: tuple[int, ...] = Field(min_length=1)

    # TaskConfig
    budget: float = Field(default=125.0, ge=0)
    rounds: int = Field(default=10, ge=2)
    first_round_ratio: float = Field(default=0.35, gt=0, le=MAX_FIRST_ROUND_RATIO)
    min_workers_to_start: int = Field(default=1, ge=1)
    group_order_policy: GroupOrderPolicy = GroupOrderPolicy.DESCENDING_REPUTATION
    empty_sample_threshold: float = Field(default=0.0, ge=0)
    fixed_threshold: float = Field(default=DEFAULT_FIXED_THRESHOLD, gt=0)

    # Population
    population: PopulationKind = PopulationKind.UNIFORM
    workers: int = Field(default=100, gt=0)
    quality_counts: tuple[int, ...] = DEFAULT_QUALITY_COUNTS
    quality_levels: tuple[float, ...] = DEFAULT_QUALITY_LEVELS
    population_file: str | None = None

    # Task sequence
    num_tasks: int = Field(default=70, gt=0)
    warmup_tasks: int = Field(default=5, ge=0)
    reputation_update: ReputationPolicyKind = ReputationPolicyKind.EMA
    reputation_alpha: float = Field(default=0.3, gt=0, le=1)
    reputation_prior_checks: int = Field(default=6, ge=1)

    # Sweeps
    sweep_parameter: SweepParameter = SweepParameter.BUDGET
    sweep_values: tuple[float, ...] = ()

    # Property campaigns
    trials: int = Field(default=1000, gt=0)
    sufficiency_multiplier: float = Field(default=10.0, gt=0)

    output: str | None = None

    @field_validator(
        "mechanisms", "seeds", "quality_counts", "quality_levels", "sweep_values", mode="before"
    )
    @classmethod
    def split_lists(cls, value: object) -> object:
        return _split(value)

    @field_validator("population_file", "output", mode="before")
    @classmethod
    def blank_is_none(cls, value: object) -> object:
        if isinstance(value, str) and not value.strip():
            return None
        return value

    @model_validator(mode="after")
    def check_consistency(self) -> "ScenarioConfig":
        if len(self.quality_counts) != len(self.quality_levels):
            raise ValueError("quality_counts and quality_levels differ in length")
        if any(count < 0 for count in self.quality_counts):
            raise ValueError("quality_counts must be non-negative")
        if self.warmup_tasks >= self.num_tasks:
            raise ValueError("warmup_tasks must be smaller than num_tasks")
        if self.population_file is None and self.population_size == 0:
            raise ValueError("the population must hold at least one worker")
        return self

    @property
    def population_size(self) -> int:
        if self.population == PopulationKind.QUALITY_MIX:
            return sum(self.quality_counts)
        return self.workers

    def task_config(self) -> TaskConfig:
        return TaskConfig(
            budget=self.budget,
            rounds=self.rounds,
            first_round_ratio=self.first_round_ratio,
            min_workers_to_start=self.min_workers_to_start,
            group_order_policy=self.group_order_policy,
            empty_sample_threshold=self.empty_sample_threshold,
        )

    def population_spec(self) -> PopulationSpec:
        if self.population == PopulationKind.QUALITY_MIX:
            return PopulationSpec.quality_mix(self.quality_counts, self.rounds, self.quality_levels)
        return PopulationSpec.uniform(self.workers, self.rounds)

    def task_sequence_spec(self) -> TaskSequenceSpec:
        return TaskSequenceSpec(
            num_tasks=self.num_tasks,
            warmup_tasks=self.warmup_tasks,
            reputation_update=self.reputation_update,
            reputation_alpha=self.reputation_alpha,
            budget=self.budget,
        )


@dataclass(frozen=True, slots=True)
class RunRow:
    """One CSV row of the run and sweep commands."""

    seed: int
    mechanism: str
    B: float
    T: int
    n_workers: int
    total_paid: float
    utility: float
    unit_payment_utility: float
    n_winners: int
    quality_proportion: float | None

    @classmethod
    def columns(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def values(self) -> tuple[object, ...]:
        return astuple(self)


@dataclass(frozen=True, slots=True)
class Table1Row:
    """One CSV row of the table1 command."""

    mechanism: str
    tasks_scored: int
    mean_proportion: float | None

    @classmethod
    def columns(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def values(self) -> tuple[object, ...]:
        return astuple(self)
