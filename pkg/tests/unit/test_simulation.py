"""
Tests for population generation, reputation dynamics, task sequences and snapshots.
"""

import numpy as np
import pytest
from pydantic import ValidationError

from apps.baselines.models import MechanismKind
from apps.common.exceptions import DomainError
from apps.common.random import harmonic_arrival_probabilities, make_generator
from apps.core.models import Bid, TaskConfig
from apps.core.services import build_outcome
from apps.simulation import services, snapshots
from apps.simulation.models import (
    Population,
    PopulationSpec,
    ReputationPolicyKind,
    TaskSequenceSpec,
)
from apps.simulation.reputation import (
    EmaReputationPolicy,
    IdentityReputationPolicy,
    get_reputation_policy,
)


class TestUniformPopulation:
    """Tests for the uniform reputation population."""

    @pytest.fixture
    def population(self):
        return services.generate_uniform_population(100, 10, seed=42)

    def test_size_and_ids(self, population):
        """Test n workers with ids 0..n-1."""
        assert [p.id for p in population.profiles] == list(range(100))
        assert len(population.bids) == 100

    def test_bid_intervals(self, population):
        """Test b in [Re/3 + 1/15, Re/3 + 4/15] and c = b."""
        for profile, bid in zip(population.profiles, population.bids, strict=True):
            low, high = services.bid_interval(np.asarray(profile.reputation))
            assert low <= bid.price <= high
            assert profile.true_cost == bid.price
            assert 0 < profile.reputation <= 1

    def test_quality_window(self, population):
        """Test internal quality lies within 0.1 of reputation."""
        for profile in population.profiles:
            assert profile.internal_quality >= max(0.0, profile.reputation - 0.1) - 1e-12
            assert profile.internal_quality <= min(1.0, profile.reputation + 0.1) + 1e-12

    def test_truthful_arrivals(self, population):
        """Test declared arrivals equal true arrivals in 1..T."""
        for profile, bid in zip(population.profiles, population.bids, strict=True):
            assert bid.declared_arrival == profile.true_arrival
            assert 1 <= profile.true_arrival <= 10

    def test_reproducible(self, population):
        """Test the same seed gives the same population."""
        again = services.generate_uniform_population(100, 10, seed=42)
        assert again == population
        assert services.generate_uniform_population(100, 10, seed=43) != population

    def test_non_positive_size(self):
        """Test n must be positive."""
        with pytest.raises(DomainError):
            services.generate_uniform_population(0, 10, seed=1)

    def test_bid_interval_endpoints(self):
        """Test Re = 0.6 gives [0.2667, 0.4667]."""
        low, high = services.bid_interval(np.asarray(0.6))
        assert low == pytest.approx(0.2667, abs=1e-4)
        assert high == pytest.approx(0.4667, abs=1e-4)


class TestArrivalLaw:
    """Tests for harmonic arrivals."""

    def test_empirical_first_step(self):
        """Test the step-1 frequency over 10^5 draws."""
        law = harmonic_arrival_probabilities(10)
        arrivals = services.draw_arrivals(100_000, law, make_generator(0))
        assert np.mean(arrivals == 1) == pytest.approx(law[0], abs=0.01)
        assert arrivals.min() >= 1
        assert arrivals.max() <= 10

    def test_spec_rejects_bad_law(self):
        """Test arrival probabilities must sum to one."""
        with pytest.raises(ValidationError):
            PopulationSpec(count=5, rounds=2, arrival_law=(0.5, 0.4))
        with pytest.raises(ValidationError):
            PopulationSpec(count=5, rounds=3, arrival_law=(0.5, 0.5))


class TestQualityPopulation:
    """Tests for the fixed data accuracy population."""

    @pytest.fixture
    def population(self):
        return services.generate_quality_population((15, 5, 5, 5), 10, seed=7)

    def test_size(self, population):
        """Test counts (15, 5, 5, 5) give 30 workers."""
        assert len(population.profiles) == 30

    @pytest.mark.parametrize("level, low, high", [(1.0, 0.4, 0.6), (0.1, 0.1, 0.3)])
    def test_bid_intervals(self, population, level, low, high):
        """Test bids follow the data accuracy interval."""
        bids = {bid.worker_id: bid for bid in population.bids}
        members = [p for p in population.profiles if p.internal_quality == level]
        assert members
        for member in members:
            assert low - 1e-12 <= bids[member.id].price <= high + 1e-12

    def test_prior_reputation(self, population):
        """Test initial reputations lie within 0.05 of the spot-check pass rate q ** 6."""
        for profile in population.profiles:
            assert abs(profile.reputation - profile.internal_quality**6) <= 0.05 + 1e-12
            assert 0 < profile.reputation <= 1

    def test_prior_separates_top_workers(self, population):
        """Test every top-accuracy newcomer outranks every dacc = 0.7 newcomer by density."""
        bids = {bid.worker_id: bid for bid in population.bids}
        top = [bids[p.id].density for p in population.profiles if p.internal_quality == 1.0]
        runner_up = [bids[p.id].density for p in population.profiles if p.internal_quality == 0.7]
        assert max(top) < min(runner_up)

    def test_negative_counts(self):
        """Test counts must be non-negative."""
        with pytest.raises(DomainError):
            services.generate_quality_population((5, -1, 0, 0), 10, seed=1)


class TestReputation:
    """Tests for reputation policies."""

    @pytest.mark.parametrize(
        "reputation, quality, participated, expected",
        [(0.5, 1.0, True, 0.65), (0.5, 1.0, False, 0.5), (1.0, 1.0, True, 1.0)],
    )
    def test_ema_update(self, reputation, quality, participated, expected):
        """Test the default alpha = 0.3 update."""
        policy = EmaReputationPolicy()
        assert services.update_reputation(policy, reputation, quality, participated) == pytest.approx(expected)

    def test_clamped(self):
        """Test updates never reach zero."""
        policy = EmaReputationPolicy(alpha=1.0)
        assert services.update_reputation(policy, 0.5, 0.0, True) == pytest.approx(1e-6)

    def test_identity(self):
        """Test the identity policy never moves."""
        assert IdentityReputationPolicy().update(0.4, 1.0, True) == 0.4

    def test_out_of_domain(self):
        """Test current reputation must lie in (0, 1]."""
        with pytest.raises(DomainError):
            services.update_reputation(EmaReputationPolicy(), 0.0, 1.0, True)

    def test_policy_lookup(self):
        """Test policies by id."""
        assert isinstance(get_reputation_policy(ReputationPolicyKind.IDENTITY), IdentityReputationPolicy)
        assert get_reputation_policy("ema", 0.5).alpha == 0.5
        with pytest.raises(DomainError):
            get_reputation_policy("bogus")

    def test_prior_checks(self):
        """Test more spot checks lower the prior of inaccurate workers only."""
        lenient = EmaReputationPolicy(prior_checks=1)
        strict = EmaReputationPolicy(prior_checks=6)
        assert lenient.prior_center(0.7) == pytest.approx(0.7)
        assert strict.prior_center(0.7) == pytest.approx(0.7**6)
        assert strict.prior_center(1.0) == 1.0
        assert get_reputation_policy("identity", prior_checks=3).prior_checks == 3
        with pytest.raises(DomainError):
            EmaReputationPolicy(prior_checks=0)


class TestQualityProportion:
    """Tests for the quality metric."""

    def test_not_started(self):
        """Test a task that never started has no proportion."""
        population = services.generate_quality_population((2, 0, 0, 0), 10, seed=1)
        outcome = build_outcome(mechanism="online", winners=(), rounds=10, costs={}, started=False)
        assert services.quality_proportion(outcome, population) is None


class TestTaskSequence:
    """Tests for repeated tasks with carried reputation."""

    def test_spec_validation(self):
        """Test warmup must be smaller than the number of tasks."""
        with pytest.raises(ValidationError):
            TaskSequenceSpec(num_tasks=5, warmup_tasks=5)
        spec = TaskSequenceSpec()
        assert (spec.num_tasks, spec.warmup_tasks, spec.budget) == (70, 5, 80.0)

    def test_all_top_quality(self):
        """Test proportions are 1.0 when every worker has top quality."""
        population = services.generate_quality_population(
            (12,), 10, seed=3, policy=IdentityReputationPolicy(), levels=(1.0,)
        )
        spec = TaskSequenceSpec(
            num_tasks=6, warmup_tasks=1, reputation_update=ReputationPolicyKind.IDENTITY
        )
        result = services.run_task_sequence(
            spec, population, MechanismKind.BID_GREEDY, TaskConfig(budget=80.0, rounds=10), seed=1
        )
        assert len(result.outcomes) == 6
        assert result.tasks_scored == 5
        assert result.mean_proportion == 1.0

    def test_identity_keeps_reputation(self):
        """Test the identity policy leaves reputations unchanged."""
        population = services.generate_quality_population((6, 2, 2, 2), 10, seed=4)
        spec = TaskSequenceSpec(
            num_tasks=4, warmup_tasks=0, reputation_update=ReputationPolicyKind.IDENTITY
        )
        result = services.run_task_sequence(
            spec, population, MechanismKind.ONLINE, TaskConfig(budget=80.0, rounds=10), seed=2
        )
        assert result.final_reputations == {p.id: p.reputation for p in population.profiles}

    def test_ema_raises_top_quality_reputation(self):
        """Test top-quality workers never lose reputation under EMA."""
        population = services.generate_quality_population((15, 5, 5, 5), 10, seed=5)
        spec = TaskSequenceSpec(num_tasks=10, warmup_tasks=2)
        result = services.run_task_sequence(
            spec, population, MechanismKind.ONLINE, TaskConfig(budget=80.0, rounds=10), seed=5
        )
        top = [p for p in population.profiles if p.internal_quality == 1.0]
        assert all(result.final_reputations[p.id] >= p.reputation for p in top)
        assert any(result.final_reputations[p.id] > p.reputation for p in top)

    def test_reproducible(self):
        """Test a sequence is reproducible from its seed."""
        population = services.generate_quality_population((15, 5, 5, 5), 10, seed=6)
        spec = TaskSequenceSpec(num_tasks=5, warmup_tasks=1)
        config = TaskConfig(budget=80.0, rounds=10)
        first = services.run_task_sequence(spec, population, MechanismKind.VANILLA, config, seed=9)
        second = services.run_task_sequence(spec, population, MechanismKind.VANILLA, config, seed=9)
        assert first.proportions == second.proportions

    def test_arrival_law_followed(self):
        """Test every task redraws arrivals from the given law, so the start slips to step 3."""
        population = services.generate_quality_population((6, 2, 2, 2), 4, seed=4)
        spec = TaskSequenceSpec(num_tasks=3, warmup_tasks=0)
        result = services.run_task_sequence(
            spec,
            population,
            MechanismKind.ONLINE,
            TaskConfig(budget=80.0, rounds=4),
            seed=2,
            arrival_law=(0.0, 0.0, 1.0, 0.0),
        )
        for outcome in result.outcomes:
            assert outcome is not None
            assert outcome.start_delay == 2

    def test_arrival_law_length(self):
        """Test the arrival law must cover every step."""
        population = services.generate_quality_population((4, 0, 0, 0), 4, seed=4)
        with pytest.raises(DomainError):
            services.run_task_sequence(
                TaskSequenceSpec(num_tasks=2, warmup_tasks=0),
                population,
                MechanismKind.ONLINE,
                TaskConfig(budget=80.0, rounds=4),
                seed=2,
                arrival_law=(0.5, 0.5),
            )

    def test_redraw_arrivals(self):
        """Test redrawn arrivals are truthful and follow the law."""
        population = services.generate_uniform_population(30, 5, seed=3)
        redrawn = services.redraw_arrivals(population, (0.0, 1.0, 0.0, 0.0, 0.0), make_generator(1))
        assert {profile.true_arrival for profile in redrawn.profiles} == {2}
        assert {bid.declared_arrival for bid in redrawn.bids} == {2}
        assert [p.true_cost for p in redrawn.profiles] == [p.true_cost for p in population.profiles]


class TestSnapshots:
    """Tests for the line-delimited population format."""

    def test_replay(self, tmp_path):
        """Test a dumped population loads back identically."""
        population = services.generate_uniform_population(20, 10, seed=8)
        path = tmp_path / "snapshots" / "population.csv"
        snapshots.dump_population(population, path)

        text = path.read_text()
        assert text.startswith("# id,Re,b,c,a,quality,a_declared\n")
        assert len(text.splitlines()) == 21
        assert snapshots.load_population(path) == population

    def test_malformed_record(self):
        """Test records with missing fields are rejected."""
        with pytest.raises(DomainError):
            snapshots.loads_population("# id,Re,b,c,a,quality\n0,0.5,0.3\n")

    def test_invalid_value(self):
        """Test out-of-range values are rejected."""
        with pytest.raises(DomainError):
            snapshots.loads_population("0,1.5,0.3,0.3,1,0.5\n")

    def test_misreported_arrival_survives_replay(self, tmp_path):
        """Test true and declared arrivals are stored apart."""
        population = services.generate_uniform_population(4, 10, seed=8)
        late = Bid(
            worker_id=0,
            declared_arrival=population.profiles[0].true_arrival + 2,
            price=population.bids[0].price,
            reputation=population.bids[0].reputation,
        )
        misreporting = Population(profiles=population.profiles, bids=(late, *population.bids[1:]))
        path = tmp_path / "population.csv"
        snapshots.dump_population(misreporting, path)

        replayed = snapshots.load_population(path)
        assert replayed == misreporting
        assert replayed.bids[0].declared_arrival == replayed.profiles[0].true_arrival + 2

    def test_truthful_records(self):
        """Test six-field records declare their true arrival."""
        population = snapshots.loads_population("# id,Re,b,c,a,quality\n3,0.5,0.3,0.25,4,0.6\n")
        assert population.profiles[0].true_arrival == 4
        assert population.bids[0].declared_arrival == 4
        assert population.profiles[0].true_cost == 0.25
