"""
Property report models.
"""

from dataclasses import dataclass, field

from django.db import models

# Absolute tolerance on every utility and payment comparison.
TOLERANCE = 1e-9


class PropertyId(models.TextChoices):
    INDIVIDUAL_RATIONALITY = "individual_rationality", "Individual rationality"
    BUDGET_FEASIBILITY = "budget_feasibility", "Budget feasibility"
    CONSUMER_SOVEREIGNTY = "consumer_sovereignty", "Consumer sovereignty"
    COST_TRUTHFULNESS = "cost_truthfulness", "Cost truthfulness"
    TIME_TRUTHFULNESS = "time_truthfulness", "Time truthfulness"
    COMPUTATIONAL_EFFICIENCY = "computational_efficiency", "Computational efficiency"


@dataclass(frozen=True, slots=True)
class Violation:
    """One failed trial, identified well enough to replay it."""

    seed: int
    digest: str
    details: str


@dataclass
class PropertyReport:
    """
    Result of checking one property over a number of trials.

    Trials discarded because a precondition failed (a budget cap fired, the
    start was delayed, or the budget was exhausted) are counted separately
    and never produce violations.
    """

    property_id: str
    trials: int = 0
    violations: list[Violation] = field(default_factory=list)
    discarded: int = 0
    sufficient_budget_flag: bool = False
    worst_regret: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.violations

    @property
    def checked(self) -> int:
        """Trials whose preconditions held."""
        return self.trials - self.discarded

    def add_violation(self, seed: int, digest: str, details: str) -> None:
        self.violations.append(Violation(seed=seed, digest=digest, details=details))

    def merge(self, other: "PropertyReport") -> "PropertyReport":
        """Combine two reports of the same property."""
        if other.property_id != self.property_id:
            raise ValueError(
                f"Cannot merge {other.property_id} into {self.property_id}"
            )
        return PropertyReport(
            property_id=self.property_id,
            trials=self.trials + other.trials,
            violations=[*self.violations, *other.violations],
            discarded=self.discarded + other.discarded,
            sufficient_budget_flag=self.sufficient_budget_flag or other.sufficient_budget_flag,
            worst_regret=max(self.worst_regret, other.worst_regret),
        )

    def summary_line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{self.property_id} {status} trials={self.trials} "
            f"discarded={self.discarded} violations={len(self.violations)} "
            f"worst_regret={self.worst_regret!r}"
        )
