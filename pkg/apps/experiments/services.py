"""
Experiment services - scenario loading, experiment runs and CSV emission.
"""

import csv
import io
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import structlog
from dotenv import dotenv_values
from pydantic import ValidationError

from apps.baselines.models import MechanismKind
from apps.baselines.services import run_mechanism
from apps.common.exceptions import ConfigurationError, DomainError
from apps.experiments.models import (
    RunRow,
    ScenarioConfig,
    SweepParameter,
    Table1Row,
)
from apps.properties.models import PropertyReport
from apps.properties.services import get_runner, run_property_suite
from apps.simulation.models import Population
from apps.simulation.reputation import get_reputation_policy
from apps.simulation.services import (
    generate_population,
    quality_proportion,
    run_task_sequence,
)
from apps.simulation.snapshots import load_population

logger = structlog.get_logger(__name__)


# =============================================================================
# Scenario files
# =============================================================================


def load_scenario(path: Path, overrides: Mapping[str, object] | None = None) -> ScenarioConfig:
    """
    Read and validate a scenario file.

    Keys are case-insensitive; overrides (from command-line flags) replace
    file values before validation. A relative population_file is resolved
    against the scenario's directory.

    Args:
        path: Scenario file in KEY=value format
        overrides: Values replacing file entries

    Returns:
        ScenarioConfig

    Raises:
        ConfigurationError: If the file is missing, malformed or invalid
    """
    if not path.is_file():
        raise ConfigurationError(str(path), ["file not found"])

    raw = dotenv_values(path)
    missing = sorted(key for key, value in raw.items() if value is None)
    if missing:
        raise ConfigurationError(str(path), [f"{key}: missing '='" for key in missing])

    values: dict[str, object] = {key.strip().lower(): value for key, value in raw.items()}
    values.update({key: value for key, value in (overrides or {}).items() if value is not None})

    try:
        scenario = ScenarioConfig.model_validate(values)
    except ValidationError as exc:
        errors = [
            f"{'.'.join(str(part) for part in error['loc']) or 'scenario'}: {error['msg']}"
            for error in exc.errors()
        ]
        raise ConfigurationError(str(path), errors) from exc

    if scenario.population_file:
        snapshot = Path(scenario.population_file)
        if not snapshot.is_absolute():
            snapshot = path.parent / snapshot
        _check_snapshot(path, snapshot, scenario.rounds)
        scenario = scenario.model_copy(update={"population_file": str(snapshot)})
    return scenario


def _check_snapshot(path: Path, snapshot: Path, rounds: int) -> None:
    """A replayed population must parse and arrive within 1..T."""
    if not snapshot.is_file():
        raise ConfigurationError(str(path), [f"population_file: {snapshot} not found"])
    try:
        population = load_population(snapshot)
    except DomainError as exc:
        raise ConfigurationError(str(path), [f"population_file: {exc}"]) from exc
    late = sorted(
        {profile.id for profile in population.profiles if profile.true_arrival > rounds}
        | {bid.worker_id for bid in population.bids if bid.declared_arrival > rounds}
    )
    if late:
        raise ConfigurationError(
            str(path), [f"population_file: workers {late} arrive after step {rounds}"]
        )


def build_population(scenario: ScenarioConfig, seed: int) -> Population:
    """Population of one run: a replayed snapshot or a freshly generated one."""
    if scenario.population_file:
        return load_population(Path(scenario.population_file))
    policy = get_reputation_policy(
        scenario.reputation_update,
        scenario.reputation_alpha,
        scenario.reputation_prior_checks,
    )
    return generate_population(scenario.population_spec(), seed, policy)


# =============================================================================
# Runs
# =============================================================================


def run_single(scenario: ScenarioConfig, mechanism: MechanismKind, seed: int) -> RunRow:
    """Run one mechanism on the population of one seed."""
    population = build_population(scenario, seed)
    config = scenario.task_config()
    with structlog.contextvars.bound_contextvars(mechanism=str(mechanism), seed=seed):
        outcome = run_mechanism(
            mechanism,
            config,
            population.profiles,
            population.schedule,
            seed=seed,
            fixed_threshold=scenario.fixed_threshold,
        )
    row = RunRow(
        seed=seed,
        mechanism=str(mechanism),
        B=config.budget,
        T=config.rounds,
        n_workers=len(population.profiles),
        total_paid=outcome.total_paid,
        utility=outcome.publisher_utility,
        unit_payment_utility=outcome.unit_payment_utility,
        n_winners=outcome.n_winners,
        quality_proportion=quality_proportion(outcome, population),
    )
    logger.info(
        "experiment.run_completed",
        mechanism=row.mechanism,
        seed=seed,
        budget=row.B,
        n_winners=row.n_winners,
        unit_payment_utility=row.unit_payment_utility,
    )
    return row


def _run_pair(args: tuple[ScenarioConfig, MechanismKind, int]) -> RunRow:
    return run_single(*args)


def run_scenario(scenario: ScenarioConfig, jobs: int = 1) -> list[RunRow]:
    """
    Run every (mechanism, seed) pair of a scenario.

    Rows come back in mechanism-then-seed order whatever the number of jobs.
    """
    pairs = [(scenario, mechanism, seed) for mechanism in scenario.mechanisms for seed in scenario.seeds]
    if jobs > 1 and len(pairs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_pair, pairs))
    return [_run_pair(pair) for pair in pairs]


def sweep_scenario(scenario: ScenarioConfig, jobs: int = 1) -> list[RunRow]:
    """
    Run the scenario once per sweep value of its budget or worker count.

    Raises:
        ConfigurationError: If the scenario lists no sweep values
    """
    if not scenario.sweep_values:
        raise ConfigurationError("scenario", ["sweep_values: at least one value is required"])

    rows: list[RunRow] = []
    for value in scenario.sweep_values:
        if scenario.sweep_parameter == SweepParameter.WORKERS:
            point = scenario.model_copy(update={"workers": int(value)})
        else:
            point = scenario.model_copy(update={"budget": float(value)})
        rows.extend(run_scenario(point, jobs))
    return rows


def _sequence_proportions(args: tuple[ScenarioConfig, MechanismKind, int]) -> list[float]:
    scenario, mechanism, seed = args
    with structlog.contextvars.bound_contextvars(mechanism=str(mechanism), seed=seed):
        result = run_task_sequence(
            scenario.task_sequence_spec(),
            build_population(scenario, seed),
            mechanism,
            scenario.task_config(),
            seed,
            fixed_threshold=scenario.fixed_threshold,
            arrival_law=scenario.population_spec().arrival_law,
        )
    return result.scored_proportions


def table1(scenario: ScenarioConfig, jobs: int = 1) -> list[Table1Row]:
    """
    Quality proportion of each mechanism over repeated task sequences.

    Every seed runs one full task sequence per mechanism on the same initial
    population; proportions of scored tasks are pooled over seeds.
    """
    pairs = [(scenario, mechanism, seed) for mechanism in scenario.mechanisms for seed in scenario.seeds]
    if jobs > 1 and len(pairs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            sequences = list(pool.map(_sequence_proportions, pairs))
    else:
        sequences = [_sequence_proportions(pair) for pair in pairs]

    rows = []
    for index, mechanism in enumerate(scenario.mechanisms):
        per_seed = sequences[index * len(scenario.seeds):(index + 1) * len(scenario.seeds)]
        scored = [proportion for proportions in per_seed for proportion in proportions]
        mean = sum(scored) / len(scored) if scored else None
        rows.append(Table1Row(mechanism=str(mechanism), tasks_scored=len(scored), mean_proportion=mean))
        logger.info(
            "experiment.run_completed",
            mechanism=str(mechanism),
            tasks_scored=len(scored),
            mean_proportion=mean,
        )
    return rows


def properties_campaign(
    scenario: ScenarioConfig,
    mechanism: str = "online",
    trials: int | None = None,
) -> list[PropertyReport]:
    """
    Run every property check for one mechanism.

    The campaign seed is the scenario's first seed.

    Raises:
        DomainError: If the mechanism cannot be property-checked
    """
    runner = get_runner(mechanism)
    return run_property_suite(
        trials or scenario.trials,
        seed=scenario.seeds[0],
        runner=runner,
        sufficiency_multiplier=scenario.sufficiency_multiplier,
        efficiency_config=scenario.task_config(),
    )


# =============================================================================
# Output
# =============================================================================


def format_value(value: object) -> str:
    """CSV cell text: repr for floats, empty for missing values."""
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_csv(columns: Sequence[str], rows: Iterable[Sequence[object]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(value) for value in row])
    return buffer.getvalue()


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[Sequence[object]]) -> Path:
    """Write rows to a CSV file, creating parent directories."""
    path.parent.mkdir(parents=True, exist_ok=True)
    text = render_csv(columns, rows)
    path.write_text(text, encoding="utf-8")
    logger.info("experiment.csv_written", path=str(path), rows=text.count("\n") - 1)
    return path


def render_reports(reports: Iterable[PropertyReport]) -> str:
    return "".join(report.summary_line() + "\n" for report in reports)
