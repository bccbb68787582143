"""
Result types of the online mechanism.
"""

from dataclasses import dataclass

from django.db import models


class PaymentRule(models.TextChoices):
    """How an admitted worker is paid."""

    THRESHOLD = "threshold", "Threshold payment"
    # Negative control: pays the declared price, breaks cost truthfulness.
    FIRST_PRICE = "first_price", "First-price payment"


@dataclass(frozen=True, slots=True)
class ThresholdResult:
    """Density threshold learned from a sample set."""

    threshold: float
    selected_sample_count: int
    sample_winner_set: tuple[int, ...]


@dataclass(frozen=True, slots=True)
class FirstStepResult:
    """Workers admitted by the offline selection at the first time step."""

    winners: tuple[int, ...]
    threshold: float
    payments: dict[int, float]


@dataclass(frozen=True, slots=True)
class StartDelayed:
    """The first step admitted fewer workers than needed to start."""

    selected: int
    required: int
