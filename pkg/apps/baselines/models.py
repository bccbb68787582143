"""
Baseline mechanism models.
"""

from django.db import models


class MechanismKind(models.TextChoices):
    """Every mechanism sharing the Outcome contract."""

    ONLINE = "online", "Online mechanism"
    FIXED_THRESHOLD = "fixed_threshold", "Fixed Threshold"
    RRAFL = "rrafl", "RRAFL"
    VANILLA = "vanilla", "Vanilla FL"
    BID_GREEDY = "bid_greedy", "Bid Greedy"
    PROPORTIONAL_SHARE = "proportional_share", "Proportional Share"
    APPROX_OPTIMAL = "approx_optimal", "Approx. Optimal"

    @property
    def is_offline(self) -> bool:
        return self in OFFLINE_KINDS


# Offline kinds see every worker at t = 1 and select everyone at t = 1.
OFFLINE_KINDS = frozenset(
    {
        MechanismKind.RRAFL,
        MechanismKind.VANILLA,
        MechanismKind.BID_GREEDY,
        MechanismKind.PROPORTIONAL_SHARE,
        MechanismKind.APPROX_OPTIMAL,
    }
)

DEFAULT_FIXED_THRESHOLD = 0.75
