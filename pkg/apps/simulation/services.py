"""
Simulation services - population generation, arrivals and task sequences.
"""

from collections.abc import Sequence

import numpy as np
import structlog
from numpy.random import Generator

from apps.baselines.models import DEFAULT_FIXED_THRESHOLD, MechanismKind
from apps.baselines.services import run_mechanism
from apps.common.exceptions import DomainError
from apps.common.random import harmonic_arrival_probabilities, make_generator
from apps.core.models import Bid, Outcome, TaskConfig, WorkerProfile
from apps.simulation.models import (
    DEFAULT_QUALITY_LEVELS,
    MIN_REPUTATION,
    BidLaw,
    Population,
    PopulationSpec,
    QualityLaw,
    ReputationLaw,
    TaskSequenceResult,
    TaskSequenceSpec,
)
from apps.simulation.reputation import (
    EmaReputationPolicy,
    ReputationPolicy,
    get_reputation_policy,
)

logger = structlog.get_logger(__name__)

BID_LOW_OFFSET = 1 / 15
BID_HIGH_OFFSET = 4 / 15
TOP_QUALITY = 1.0
QUALITY_WINDOW = 0.1


def bid_interval(level: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Bid price interval for a reputation or data accuracy level."""
    return level / 3 + BID_LOW_OFFSET, level / 3 + BID_HIGH_OFFSET


def draw_arrivals(count: int, arrival_law: Sequence[float], rng: Generator) -> np.ndarray:
    """Draw true arrival steps in 1..T from a per-step probability vector."""
    probabilities = np.asarray(arrival_law, dtype=float)
    return rng.choice(len(probabilities), size=count, p=probabilities) + 1


def _population(
    reputations: np.ndarray,
    prices: np.ndarray,
    qualities: np.ndarray,
    arrivals: np.ndarray,
) -> Population:
    profiles = []
    bids = []
    for worker_id, (reputation, price, quality, arrival) in enumerate(
        zip(reputations, prices, qualities, arrivals, strict=True)
    ):
        profiles.append(
            WorkerProfile(
                id=worker_id,
                true_cost=float(price),
                true_arrival=int(arrival),
                reputation=float(reputation),
                internal_quality=float(quality),
            )
        )
        bids.append(
            Bid(
                worker_id=worker_id,
                declared_arrival=int(arrival),
                price=float(price),
                reputation=float(reputation),
            )
        )
    return Population(profiles=tuple(profiles), bids=tuple(bids))


def generate_population(
    spec: PopulationSpec,
    seed: int,
    policy: ReputationPolicy | None = None,
) -> Population:
    """
    Generate a truthful population from its laws.

    Workers bid their true cost and declare their true arrival step.

    Args:
        spec: Population laws
        seed: Seed of the population stream
        policy: Reputation policy whose prior seeds POLICY_PRIOR reputations

    Returns:
        Population
    """
    rng = make_generator(seed)
    policy = policy or EmaReputationPolicy()

    if spec.quality_law == QualityLaw.LEVELS:
        qualities = np.repeat(
            np.asarray(spec.quality_levels, dtype=float),
            np.asarray(spec.quality_counts, dtype=int),
        )
    else:
        qualities = None

    if spec.reputation_law == ReputationLaw.UNIFORM:
        reputations = np.clip(rng.uniform(0.0, 1.0, spec.count), MIN_REPUTATION, 1.0)
    else:
        if qualities is None:
            raise DomainError("A policy prior needs fixed quality levels")
        reputations = np.array([policy.prior(float(q), rng) for q in qualities])

    levels = reputations if spec.bid_law == BidLaw.REPUTATION_LINEAR else qualities
    if levels is None:
        raise DomainError("A quality-linear bid law needs fixed quality levels")
    low, high = bid_interval(np.asarray(levels))
    prices = rng.uniform(low, high)

    if qualities is None:
        qualities = rng.uniform(
            np.maximum(0.0, reputations - QUALITY_WINDOW),
            np.minimum(1.0, reputations + QUALITY_WINDOW),
        )

    arrivals = draw_arrivals(spec.count, spec.arrival_law, rng)
    return _population(reputations, prices, qualities, arrivals)


def generate_uniform_population(count: int, rounds: int, seed: int) -> Population:
    """Population with uniform reputations and reputation-linear bids."""
    if count <= 0:
        raise DomainError(f"Population size must be positive, got {count}")
    return generate_population(PopulationSpec.uniform(count, rounds), seed)


def generate_quality_population(
    counts: Sequence[int],
    rounds: int,
    seed: int,
    policy: ReputationPolicy | None = None,
    levels: Sequence[float] = DEFAULT_QUALITY_LEVELS,
) -> Population:
    """Population of fixed data accuracy levels with quality-linear bids."""
    if any(count < 0 for count in counts):
        raise DomainError(f"Counts must be non-negative, got {tuple(counts)}")
    spec = PopulationSpec.quality_mix(tuple(counts), rounds, tuple(levels))
    return generate_population(spec, seed, policy)


def redraw_arrivals(
    population: Population,
    arrival_law: Sequence[float],
    rng: Generator,
) -> Population:
    """Same workers, fresh truthful arrival steps drawn from arrival_law."""
    arrivals = draw_arrivals(len(population.profiles), arrival_law, rng)
    profiles = tuple(
        profile.model_copy(update={"true_arrival": int(arrival)})
        for profile, arrival in zip(population.profiles, arrivals, strict=True)
    )
    bids = tuple(
        Bid(
            worker_id=profile.id,
            declared_arrival=profile.true_arrival,
            price=profile.true_cost,
            reputation=profile.reputation,
        )
        for profile in profiles
    )
    return Population(profiles=profiles, bids=bids)


def with_reputations(population: Population, reputations: dict[int, float]) -> Population:
    """Same workers and arrivals with updated public reputations."""
    profiles = tuple(
        profile.model_copy(update={"reputation": reputations[profile.id]})
        for profile in population.profiles
    )
    bids = tuple(
        Bid(
            worker_id=bid.worker_id,
            declared_arrival=bid.declared_arrival,
            price=bid.price,
            reputation=reputations[bid.worker_id],
        )
        for bid in population.bids
    )
    return Population(profiles=profiles, bids=bids)


def update_reputation(
    policy: ReputationPolicy,
    reputation: float,
    quality: float,
    participated: bool,
) -> float:
    """
    Apply one task's reputation update.

    Raises:
        DomainError: If the current reputation is outside (0, 1]
    """
    if not 0 < reputation <= 1:
        raise DomainError(f"Reputation must lie in (0, 1], got {reputation}")
    return policy.update(reputation, quality, participated)


def quality_proportion(
    outcome: Outcome,
    population: Population,
    top_quality: float = TOP_QUALITY,
) -> float | None:
    """
    Share of winners whose internal quality reaches the top level.

    Returns:
        Fraction in [0, 1], or None when the task had no winners
    """
    if not outcome.started or not outcome.winners:
        return None
    qualities = {profile.id: profile.internal_quality for profile in population.profiles}
    top = sum(
        1 for record in outcome.winners
        if qualities[record.worker_id] >= top_quality - 1e-12
    )
    return top / len(outcome.winners)


def run_task_sequence(
    spec: TaskSequenceSpec,
    population: Population,
    mechanism: MechanismKind,
    config: TaskConfig,
    seed: int,
    fixed_threshold: float = DEFAULT_FIXED_THRESHOLD,
    top_quality: float = TOP_QUALITY,
    arrival_law: Sequence[float] | None = None,
) -> TaskSequenceResult:
    """
    Run consecutive tasks over one population.

    Every task draws fresh arrivals, runs the mechanism with the task budget
    and then updates the reputation of each worker according to whether it
    won. Tasks that never start are recorded as None and skipped by the
    quality metric.

    Args:
        spec: Sequence parameters
        population: Workers at the start of the sequence
        mechanism: Mechanism run for every task
        config: Task configuration; its budget is replaced by spec.budget
        seed: Seed of the arrival streams
        fixed_threshold: Threshold of the Fixed Threshold mechanism
        top_quality: Quality level counted by the proportion metric
        arrival_law: Per-step arrival probabilities, harmonic when absent

    Returns:
        TaskSequenceResult

    Raises:
        DomainError: If arrival_law does not cover exactly config.rounds steps
    """
    if arrival_law is None:
        arrival_law = harmonic_arrival_probabilities(config.rounds)
    if len(arrival_law) != config.rounds:
        raise DomainError(
            f"Arrival law covers {len(arrival_law)} steps, expected {config.rounds}"
        )
    policy = get_reputation_policy(spec.reputation_update, spec.reputation_alpha)
    task_config = config.model_copy(update={"budget": spec.budget})
    reputations = {profile.id: profile.reputation for profile in population.profiles}
    result = TaskSequenceResult(mechanism=str(mechanism), warmup_tasks=spec.warmup_tasks)
    log = logger.bind(mechanism=str(mechanism), seed=seed)

    for task in range(spec.num_tasks):
        rng = make_generator(seed, task)
        current = redraw_arrivals(with_reputations(population, reputations), arrival_law, rng)
        outcome = run_mechanism(
            mechanism,
            task_config,
            current.profiles,
            current.schedule,
            seed=int(rng.integers(2**31)),
            fixed_threshold=fixed_threshold,
        )

        if not outcome.started:
            result.outcomes.append(None)
            result.proportions.append(None)
            log.info("task_sequence.task_never_started", task=task)
            continue

        winners = {record.worker_id for record in outcome.winners}
        for profile in current.profiles:
            reputations[profile.id] = update_reputation(
                policy,
                reputations[profile.id],
                profile.internal_quality,
                profile.id in winners,
            )

        proportion = quality_proportion(outcome, current, top_quality)
        result.outcomes.append(outcome)
        result.proportions.append(proportion)
        log.debug("task_sequence.task_completed", task=task, proportion=proportion)

    result.final_reputations = dict(reputations)
    return result
