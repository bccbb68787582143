"""
Pluggable reputation dynamics.

The publisher's reputation of a worker moves only when the worker takes part
in a task; what it moves towards is the worker's internal quality.

A newcomer arrives with the reputation it earned on earlier spot checks: a
worker whose labels are right with probability q passes ``prior_checks``
independent checks with probability q ** prior_checks, so inaccurate workers
start well below their accuracy.
"""

from abc import ABC, abstractmethod

from numpy.random import Generator

from apps.common.exceptions import DomainError
from apps.simulation.models import MIN_REPUTATION, ReputationPolicyKind

DEFAULT_ALPHA = 0.3
DEFAULT_PRIOR_CHECKS = 6
PRIOR_WINDOW = 0.05


def clamp_reputation(value: float) -> float:
    return min(1.0, max(MIN_REPUTATION, value))


class ReputationPolicy(ABC):
    """Abstract base class for reputation update policies."""

    kind: ReputationPolicyKind

    def __init__(self, prior_checks: int = DEFAULT_PRIOR_CHECKS):
        if prior_checks < 1:
            raise DomainError(f"prior_checks must be at least 1, got {prior_checks}")
        self.prior_checks = prior_checks

    @abstractmethod
    def update(self, reputation: float, quality: float, participated: bool) -> float:
        """Return the reputation after one task."""
        pass

    def prior_center(self, quality: float) -> float:
        """Spot-check pass rate of a worker with the given quality."""
        return clamp_reputation(quality**self.prior_checks)

    def prior(self, quality: float, rng: Generator) -> float:
        """Initial reputation of a newcomer, within PRIOR_WINDOW of its pass rate."""
        center = self.prior_center(quality)
        low = max(MIN_REPUTATION, center - PRIOR_WINDOW)
        high = min(1.0, center + PRIOR_WINDOW)
        return clamp_reputation(float(rng.uniform(low, high)))


class EmaReputationPolicy(ReputationPolicy):
    """Participants move a fraction alpha of the way to their quality."""

    kind = ReputationPolicyKind.EMA

    def __init__(self, alpha: float = DEFAULT_ALPHA, prior_checks: int = DEFAULT_PRIOR_CHECKS):
        if not 0 < alpha <= 1:
            raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
        super().__init__(prior_checks)
        self.alpha = alpha

    def update(self, reputation: float, quality: float, participated: bool) -> float:
        if not participated:
            return reputation
        return clamp_reputation((1 - self.alpha) * reputation + self.alpha * quality)


class IdentityReputationPolicy(ReputationPolicy):
    kind = ReputationPolicyKind.IDENTITY

    def update(self, reputation: float, quality: float, participated: bool) -> float:
        return reputation


def get_reputation_policy(
    kind: ReputationPolicyKind | str,
    alpha: float = DEFAULT_ALPHA,
    prior_checks: int = DEFAULT_PRIOR_CHECKS,
) -> ReputationPolicy:
    """
    Look up a reputation policy by id.

    Raises:
        DomainError: If the id is unknown
    """
    if kind == ReputationPolicyKind.EMA:
        return EmaReputationPolicy(alpha, prior_checks)
    if kind == ReputationPolicyKind.IDENTITY:
        return IdentityReputationPolicy(prior_checks)
    raise DomainError(f"Unknown reputation policy: {kind}")
