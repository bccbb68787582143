"""
Property services - invariant checkers, misreport fuzzers and campaigns.

Every fuzzer re-runs the full mechanism for each perturbation so that any
coupling through learned thresholds shows up in the compared utilities.
"""

import hashlib
import math
from collections.abc import Callable, Iterable, Mapping, Sequence
from functools import partial

import structlog
from numpy.random import Generator

from apps.common.exceptions import DomainError
from apps.common.random import make_generator
from apps.core.models import Bid, Outcome, TaskConfig, WorkerProfile, group_of
from apps.core.selectors import ArrivalSchedule, all_bids, bids_declared_up_to, find_bid
from apps.core.services import worker_utility
from apps.online.models import PaymentRule
from apps.online.services import run_online_auction
from apps.properties.models import TOLERANCE, PropertyId, PropertyReport
from apps.simulation.models import Population
from apps.simulation.services import generate_uniform_population

logger = structlog.get_logger(__name__)

AuctionRunner = Callable[[TaskConfig, ArrivalSchedule, Mapping[int, float] | None], Outcome]

RUNNERS: dict[str, AuctionRunner] = {
    "online": run_online_auction,
    "broken_first_price": partial(run_online_auction, payment_rule=PaymentRule.FIRST_PRICE),
}

PERTURBATION_RANGE = (0.25, 4.0)
SOVEREIGNTY_FACTORS = (0.5, 0.1, 1e-2, 1e-3, 1e-4, 1e-6)
EFFICIENCY_CONSTANT = 8.0
EFFICIENCY_SIZES = (25, 50, 100, 200)

INSTANCE_WORKERS = (10, 200)
INSTANCE_BUDGET = (10.0, 500.0)
INSTANCE_ROUNDS = (2, 20)
# instance draws allowed per requested trial before a campaign gives up
MAX_DRAWS_PER_TRIAL = 4


def get_runner(name: str) -> AuctionRunner:
    """
    Look up an auction runner by mechanism id.

    Raises:
        DomainError: If the mechanism cannot be property-checked
    """
    try:
        return RUNNERS[name]
    except KeyError:
        raise DomainError(
            f"Mechanism {name!r} cannot be property-checked; use one of {sorted(RUNNERS)}"
        ) from None


def instance_digest(config: TaskConfig, schedule: ArrivalSchedule) -> str:
    """Short stable fingerprint of an instance for violation reports."""
    payload = config.model_dump_json() + "|" + ";".join(
        f"{bid.worker_id},{bid.declared_arrival},{bid.price!r},{bid.reputation!r}"
        for bid in sorted(all_bids(schedule), key=lambda bid: bid.worker_id)
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def replace_bid(
    schedule: ArrivalSchedule,
    worker_id: int,
    *,
    price: float | None = None,
    arrival: int | None = None,
) -> dict[int, list[Bid]]:
    """Copy of a schedule with one worker's declared price or arrival changed."""
    replaced: dict[int, list[Bid]] = {}
    for bid in all_bids(schedule):
        if bid.worker_id == worker_id:
            bid = Bid(
                worker_id=worker_id,
                declared_arrival=bid.declared_arrival if arrival is None else arrival,
                price=bid.price if price is None else price,
                reputation=bid.reputation,
            )
        replaced.setdefault(bid.declared_arrival, []).append(bid)
    return replaced


def truthful_schedule(schedule: ArrivalSchedule, costs: Mapping[int, float]) -> dict[int, list[Bid]]:
    """Copy of a schedule where every worker bids its true cost."""
    return {
        step: [
            Bid(
                worker_id=bid.worker_id,
                declared_arrival=bid.declared_arrival,
                price=costs.get(bid.worker_id, bid.price),
                reputation=bid.reputation,
            )
            for bid in bids
        ]
        for step, bids in schedule.items()
    }


def _sufficient(outcome: Outcome) -> bool:
    """No cap fired and the task started on time."""
    return outcome.started and outcome.start_delay == 0 and not outcome.budget_constrained


def _finish(report: PropertyReport, **context: object) -> PropertyReport:
    logger.info("property.finished", summary=report.summary_line(), **context)
    return report


def _record_violation(
    report: PropertyReport, seed: int, digest: str, details: str
) -> None:
    report.add_violation(seed, digest, details)
    logger.warning(
        "property.violation",
        property=report.property_id,
        seed=seed,
        digest=digest,
        details=details,
    )


# =============================================================================
# Invariant checkers
# =============================================================================


def check_individual_rationality(
    outcome: Outcome,
    profiles: Sequence[WorkerProfile] | None = None,
    seed: int = 0,
    digest: str = "",
) -> PropertyReport:
    """
    Check that no truthful worker ends with a negative utility.

    Args:
        outcome: Outcome of a run with truthful bids
        profiles: Worker truths; the outcome's own utilities are used when absent
        seed: Seed recorded with any violation
        digest: Instance digest recorded with any violation

    Returns:
        PropertyReport over one trial
    """
    report = PropertyReport(property_id=PropertyId.INDIVIDUAL_RATIONALITY, trials=1)
    if profiles is None:
        utilities = dict(outcome.worker_utilities)
    else:
        utilities = {
            profile.id: worker_utility(
                outcome.record_for(profile.id), profile.true_cost, outcome.rounds
            )
            for profile in profiles
        }

    for worker_id, utility in sorted(utilities.items()):
        if utility < -TOLERANCE:
            report.worst_regret = max(report.worst_regret, -utility)
            _record_violation(
                report, seed, digest, f"worker {worker_id} utility {utility!r} < 0"
            )
    return report


def check_budget_feasibility(
    outcome: Outcome,
    budget: float,
    seed: int = 0,
    digest: str = "",
) -> PropertyReport:
    """
    Check that payments stay within the budget and, when the mechanism splits
    the budget, within each group's half.
    """
    report = PropertyReport(property_id=PropertyId.BUDGET_FEASIBILITY, trials=1)
    overrun = outcome.total_paid - budget
    if overrun > TOLERANCE:
        report.worst_regret = overrun
        _record_violation(
            report, seed, digest, f"total paid {outcome.total_paid!r} exceeds budget {budget!r}"
        )

    if outcome.enforces_group_caps:
        for group_id, paid in enumerate(outcome.group_payments):
            overrun = paid - budget / 2
            if overrun > TOLERANCE:
                report.worst_regret = max(report.worst_regret, overrun)
                _record_violation(
                    report,
                    seed,
                    digest,
                    f"group {group_id + 1} paid {paid!r} exceeds half budget {budget / 2!r}",
                )
    return report


def _entry_step(outcome: Outcome, bid: Bid) -> int:
    return max(1, bid.declared_arrival - outcome.start_delay)


def _applied_thresholds(outcome: Outcome, bid: Bid) -> list[float]:
    """Thresholds the worker's group faced from its entry step onwards."""
    entry = _entry_step(outcome, bid)
    column = 1 + group_of(bid.worker_id)
    return [entry_row[column] for entry_row in outcome.threshold_history if entry_row[0] >= entry]


def _sovereignty_vacuous(outcome: Outcome, bid: Bid) -> bool:
    """Whether no bid could have won: no budget or threshold left for the worker."""
    if not outcome.started or _entry_step(outcome, bid) > outcome.rounds:
        return True
    if bid.worker_id in outcome.cap_rejected:
        return True
    return all(threshold <= 0 for threshold in _applied_thresholds(outcome, bid))


def check_consumer_sovereignty(
    config: TaskConfig,
    schedule: ArrivalSchedule,
    worker_id: int,
    runner: AuctionRunner = run_online_auction,
    seed: int = 0,
    true_costs: Mapping[int, float] | None = None,
) -> PropertyReport:
    """
    Check that some bid makes the worker a winner.

    The worker's price is lowered step by step towards zero and the auction
    re-run; the last attempt bids half the lowest positive threshold the
    worker's group faced. A worker that was cap-rejected, faced only zero
    thresholds or never entered makes the trial vacuous.

    Raises:
        DomainError: If the worker has no bid in the schedule
    """
    bid = find_bid(schedule, worker_id)
    if bid is None:
        raise DomainError(f"Worker {worker_id} has no bid in the schedule")

    report = PropertyReport(property_id=PropertyId.CONSUMER_SOVEREIGNTY, trials=1)
    digest = instance_digest(config, schedule)

    outcome = runner(config, schedule, true_costs)
    if outcome.record_for(worker_id) is not None:
        return report

    for factor in SOVEREIGNTY_FACTORS:
        outcome = runner(config, replace_bid(schedule, worker_id, price=bid.price * factor), true_costs)
        if outcome.record_for(worker_id) is not None:
            return report

    positive = [t for t in _applied_thresholds(outcome, bid) if t > 0]
    if positive:
        price = min(positive) * bid.reputation / 2
        outcome = runner(config, replace_bid(schedule, worker_id, price=price), true_costs)
        if outcome.record_for(worker_id) is not None:
            return report

    if _sovereignty_vacuous(outcome, bid):
        report.discarded = 1
        report.sufficient_budget_flag = outcome.budget_constrained
        return report

    _record_violation(
        report, seed, digest, f"worker {worker_id} never selected at any lowered bid"
    )
    return report


# =============================================================================
# Misreport fuzzers
# =============================================================================


def _fuzz(
    property_id: PropertyId,
    config: TaskConfig,
    schedule: ArrivalSchedule,
    trials: int,
    sufficiency_multiplier: float,
    seed: int,
    runner: AuctionRunner,
    true_costs: Mapping[int, float] | None,
    perturb: Callable[[dict[int, list[Bid]], Bid, Generator], dict[int, list[Bid]]],
) -> PropertyReport:
    if trials < 0:
        raise DomainError(f"Trials must be non-negative, got {trials}")
    if sufficiency_multiplier <= 0:
        raise DomainError(f"Sufficiency multiplier must be positive, got {sufficiency_multiplier}")

    report = PropertyReport(property_id=property_id)
    bids = sorted(all_bids(schedule), key=lambda bid: bid.worker_id)
    if not bids or trials == 0:
        return report

    costs = {bid.worker_id: bid.price for bid in bids}
    costs.update(true_costs or {})
    scaled = config.scaled(sufficiency_multiplier)
    truthful = truthful_schedule(schedule, costs)
    digest = instance_digest(scaled, truthful)

    baseline = runner(scaled, truthful, costs)
    report.trials = trials
    if not _sufficient(baseline):
        report.discarded = trials
        report.sufficient_budget_flag = baseline.budget_constrained
        return report

    truthful_bids = {bid.worker_id: bid for bid in all_bids(truthful)}
    for trial in range(trials):
        rng = make_generator(seed, trial)
        target = truthful_bids[bids[int(rng.integers(len(bids)))].worker_id]
        outcome = runner(scaled, perturb(truthful, target, rng), costs)
        if not _sufficient(outcome):
            report.discarded += 1
            report.sufficient_budget_flag |= outcome.budget_constrained
            continue

        regret = (
            outcome.worker_utilities[target.worker_id]
            - baseline.worker_utilities[target.worker_id]
        )
        report.worst_regret = max(report.worst_regret, regret)
        if regret > TOLERANCE:
            _record_violation(
                report,
                seed,
                digest,
                f"trial {trial}: worker {target.worker_id} gains {regret!r} by misreporting",
            )
    return report


def fuzz_cost_truthfulness(
    config: TaskConfig,
    schedule: ArrivalSchedule,
    trials: int,
    sufficiency_multiplier: float = 10.0,
    seed: int = 0,
    runner: AuctionRunner = run_online_auction,
    true_costs: Mapping[int, float] | None = None,
) -> PropertyReport:
    """
    Fuzz misreported prices against truthful bidding.

    The budget is scaled by sufficiency_multiplier; runs in which a group cap
    fired or the start was delayed are discarded and counted. Each trial
    picks a worker and multiplies its true cost by a log-uniform factor in
    [0.25, 4].

    Args:
        config: Task configuration before scaling
        schedule: Arrival schedule; prices are replaced by true costs for the
            truthful run
        trials: Number of perturbations
        sufficiency_multiplier: Budget multiplier making caps unlikely to bind
        seed: Seed of the perturbation stream
        runner: Mechanism under test
        true_costs: True costs; declared prices stand in when absent

    Returns:
        PropertyReport
    """
    low, high = math.log(PERTURBATION_RANGE[0]), math.log(PERTURBATION_RANGE[1])

    def perturb(truthful: dict[int, list[Bid]], target: Bid, rng: Generator) -> dict[int, list[Bid]]:
        factor = math.exp(rng.uniform(low, high))
        return replace_bid(truthful, target.worker_id, price=target.price * factor)

    return _fuzz(
        PropertyId.COST_TRUTHFULNESS,
        config,
        schedule,
        trials,
        sufficiency_multiplier,
        seed,
        runner,
        true_costs,
        perturb,
    )


def fuzz_time_truthfulness(
    config: TaskConfig,
    schedule: ArrivalSchedule,
    trials: int,
    sufficiency_multiplier: float = 10.0,
    seed: int = 0,
    runner: AuctionRunner = run_online_auction,
    true_costs: Mapping[int, float] | None = None,
) -> PropertyReport:
    """
    Fuzz delayed arrival reports against truthful arrival.

    Each trial picks a worker and declares an arrival drawn uniformly from
    its true arrival step up to T; prices stay truthful. Discarding works as
    in fuzz_cost_truthfulness.
    """

    def perturb(truthful: dict[int, list[Bid]], target: Bid, rng: Generator) -> dict[int, list[Bid]]:
        latest = max(target.declared_arrival, config.rounds)
        arrival = int(rng.integers(target.declared_arrival, latest + 1))
        return replace_bid(truthful, target.worker_id, arrival=arrival)

    return _fuzz(
        PropertyId.TIME_TRUTHFULNESS,
        config,
        schedule,
        trials,
        sufficiency_multiplier,
        seed,
        runner,
        true_costs,
        perturb,
    )


# =============================================================================
# Computational efficiency
# =============================================================================


def operation_bound(
    schedule: ArrivalSchedule,
    outcome: Outcome,
    constant: float = EFFICIENCY_CONSTANT,
) -> float:
    """
    Operation budget C * sum over selection passes of (n + 1) * log2(n + 2).

    n is the number of arrived workers at each first-step attempt and at
    every later step.
    """
    attempts = outcome.start_delay + 1 if outcome.started else outcome.rounds
    sizes = [len(bids_declared_up_to(schedule, 1 + d)) for d in range(attempts)]
    if outcome.started:
        sizes.extend(
            len(bids_declared_up_to(schedule, step + outcome.start_delay))
            for step in range(2, outcome.rounds + 1)
        )
    return constant * sum((n + 1) * math.log2(n + 2) for n in sizes)


def check_computational_efficiency(
    config: TaskConfig,
    sizes: Iterable[int] = EFFICIENCY_SIZES,
    seed: int = 0,
    runner: AuctionRunner = run_online_auction,
    constant: float = EFFICIENCY_CONSTANT,
) -> PropertyReport:
    """
    Check that selection work grows no faster than n log n per step.

    Runs the mechanism on uniform populations of growing size and compares
    the counted operations with operation_bound.

    Returns:
        PropertyReport; worst_regret holds the largest operation overrun
    """
    report = PropertyReport(property_id=PropertyId.COMPUTATIONAL_EFFICIENCY)
    for index, size in enumerate(sizes):
        population_seed = int(make_generator(seed, index).integers(2**31))
        population = generate_uniform_population(size, config.rounds, population_seed)
        schedule = population.schedule
        outcome = runner(config, schedule, population.true_costs)
        bound = operation_bound(schedule, outcome, constant)
        report.trials += 1
        overrun = outcome.operations - bound
        report.worst_regret = max(report.worst_regret, overrun)
        if overrun > 0:
            _record_violation(
                report,
                seed,
                instance_digest(config, schedule),
                f"n={size}: {outcome.operations} operations exceed bound {bound:.1f}",
            )
    return report


# =============================================================================
# Campaigns over random instances
# =============================================================================


def random_instance(rng: Generator) -> tuple[TaskConfig, Population]:
    """Draw n in [10, 200], B in [10, 500] and T in [2, 20] with a uniform population."""
    count = int(rng.integers(INSTANCE_WORKERS[0], INSTANCE_WORKERS[1] + 1))
    budget = float(rng.uniform(*INSTANCE_BUDGET))
    rounds = int(rng.integers(INSTANCE_ROUNDS[0], INSTANCE_ROUNDS[1] + 1))
    population = generate_uniform_population(count, rounds, int(rng.integers(2**31)))
    return TaskConfig(budget=budget, rounds=rounds), population


def budget_campaign(
    trials: int,
    seed: int = 0,
    runner: AuctionRunner = run_online_auction,
) -> tuple[PropertyReport, PropertyReport]:
    """
    Individual rationality and budget feasibility over random truthful runs.

    Returns:
        (individual rationality report, budget feasibility report)
    """
    rationality = PropertyReport(property_id=PropertyId.INDIVIDUAL_RATIONALITY)
    feasibility = PropertyReport(property_id=PropertyId.BUDGET_FEASIBILITY)
    for trial in range(trials):
        config, population = random_instance(make_generator(seed, trial))
        schedule = population.schedule
        digest = instance_digest(config, schedule)
        outcome = runner(config, schedule, population.true_costs)
        rationality = rationality.merge(
            check_individual_rationality(outcome, population.profiles, trial, digest)
        )
        feasibility = feasibility.merge(
            check_budget_feasibility(outcome, config.budget, trial, digest)
        )
    return _finish(rationality, seed=seed), _finish(feasibility, seed=seed)


def sovereignty_campaign(
    trials: int,
    seed: int = 0,
    runner: AuctionRunner = run_online_auction,
) -> PropertyReport:
    """Consumer sovereignty over random (instance, worker) pairs."""
    report = PropertyReport(property_id=PropertyId.CONSUMER_SOVEREIGNTY)
    for trial in range(trials):
        rng = make_generator(seed, trial)
        config, population = random_instance(rng)
        worker_id = int(rng.integers(len(population.profiles)))
        report = report.merge(
            check_consumer_sovereignty(
                config,
                population.schedule,
                worker_id,
                runner,
                seed=trial,
                true_costs=population.true_costs,
            )
        )
    return _finish(report, seed=seed)


def truthfulness_campaign(
    property_id: PropertyId,
    trials: int,
    seed: int = 0,
    runner: AuctionRunner = run_online_auction,
    sufficiency_multiplier: float = 10.0,
) -> PropertyReport:
    """
    Misreports over random instances for the cost or time fuzzer.

    Each instance gets one misreport. Instances are drawn until ``trials``
    misreports ran under a sufficient budget, so discarded trials never
    shrink the campaign, up to MAX_DRAWS_PER_TRIAL draws per trial.
    """
    fuzzers = {
        PropertyId.COST_TRUTHFULNESS: fuzz_cost_truthfulness,
        PropertyId.TIME_TRUTHFULNESS: fuzz_time_truthfulness,
    }
    if property_id not in fuzzers:
        raise DomainError(f"No fuzzer for {property_id}")
    fuzz = fuzzers[property_id]

    report = PropertyReport(property_id=property_id)
    draw = 0
    while report.checked < trials and draw < trials * MAX_DRAWS_PER_TRIAL:
        config, population = random_instance(make_generator(seed, draw))
        report = report.merge(
            fuzz(
                config,
                population.schedule,
                trials=1,
                sufficiency_multiplier=sufficiency_multiplier,
                seed=draw,
                runner=runner,
                true_costs=population.true_costs,
            )
        )
        draw += 1
    if report.checked < trials:
        logger.warning(
            "property.too_few_sufficient_trials",
            property_id=str(property_id),
            checked=report.checked,
            requested=trials,
        )
    return _finish(report, seed=seed)


def run_property_suite(
    trials: int,
    seed: int = 0,
    runner: AuctionRunner = run_online_auction,
    sufficiency_multiplier: float = 10.0,
    efficiency_config: TaskConfig | None = None,
) -> list[PropertyReport]:
    """
    Run every property check and return the reports in a fixed order.

    Raises:
        DomainError: If trials is not positive
    """
    if trials <= 0:
        raise DomainError(f"Trials must be positive, got {trials}")

    rationality, feasibility = budget_campaign(trials, seed, runner)
    efficiency = check_computational_efficiency(
        efficiency_config or TaskConfig(budget=125.0, rounds=10), seed=seed, runner=runner
    )
    return [
        rationality,
        feasibility,
        sovereignty_campaign(trials, seed, runner),
        truthfulness_campaign(
            PropertyId.COST_TRUTHFULNESS, trials, seed, runner, sufficiency_multiplier
        ),
        truthfulness_campaign(
            PropertyId.TIME_TRUTHFULNESS, trials, seed, runner, sufficiency_multiplier
        ),
        _finish(efficiency, seed=seed),
    ]
