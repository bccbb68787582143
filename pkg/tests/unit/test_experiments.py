"""
Tests for scenario files, experiment runs and management commands.
"""

from io import StringIO
from pathlib import Path
from statistics import mean

import pytest
from django.core.management import call_command
from django.core.management.base import CommandError

from apps.common.exceptions import ConfigurationError
from apps.experiments import services
from apps.experiments.models import PopulationKind, RunRow, ScenarioConfig, Table1Row
from apps.simulation.services import generate_uniform_population
from apps.simulation.snapshots import dump_population

SCENARIOS_DIR = Path(__file__).resolve().parents[2] / "scenarios"


@pytest.fixture
def write_scenario(tmp_path):
    """Factory writing a scenario file and returning its path."""

    def write(text: str, name: str = "scenario.env"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return write


@pytest.fixture
def small_scenario(write_scenario):
    return write_scenario(
        "MECHANISMS=online,bid_greedy\nSEEDS=1,2\nBUDGET=60\nWORKERS=30\nROUNDS=5\n"
    )


class TestLoadScenario:
    """Tests for load_scenario."""

    def test_valid(self, write_scenario):
        """Test list keys are split and defaults filled in."""
        scenario = services.load_scenario(
            write_scenario("mechanisms=online, vanilla\nseeds=3,4\nbudget=80\n")
        )
        assert scenario.mechanisms == ("online", "vanilla")
        assert scenario.seeds == (3, 4)
        assert scenario.budget == 80.0
        assert scenario.rounds == 10
        assert scenario.population == PopulationKind.UNIFORM

    def test_keys_case_insensitive(self, write_scenario):
        """Test keys are matched regardless of case."""
        scenario = services.load_scenario(write_scenario("Seeds=1\nBudget=50\nROUNDS=4\n"))
        assert (scenario.budget, scenario.rounds) == (50.0, 4)

    def test_empty_seeds(self, write_scenario):
        """Test an empty seed list is rejected."""
        with pytest.raises(ConfigurationError) as exc_info:
            services.load_scenario(write_scenario("SEEDS=\n"))
        assert "seeds" in str(exc_info.value)

    def test_unknown_key(self, write_scenario):
        """Test misspelled keys are rejected."""
        with pytest.raises(ConfigurationError):
            services.load_scenario(write_scenario("SEEDS=1\nBUDGTE=10\n"))

    def test_line_without_value(self, write_scenario):
        """Test a key without '=' is rejected."""
        with pytest.raises(ConfigurationError):
            services.load_scenario(write_scenario("SEEDS=1\nBUDGET\n"))

    def test_missing_file(self, tmp_path):
        """Test a missing file is a configuration error."""
        with pytest.raises(ConfigurationError) as exc_info:
            services.load_scenario(tmp_path / "absent.env")
        assert "file not found" in str(exc_info.value)

    def test_overrides(self, write_scenario):
        """Test overrides replace file values and None overrides are ignored."""
        scenario = services.load_scenario(
            write_scenario("SEEDS=1\nBUDGET=50\n"), {"seeds": "7,8", "budget": None}
        )
        assert scenario.seeds == (7, 8)
        assert scenario.budget == 50.0

    def test_inconsistent_quality_mix(self, write_scenario):
        """Test counts and levels must pair up."""
        with pytest.raises(ConfigurationError):
            services.load_scenario(
                write_scenario("SEEDS=1\nQUALITY_COUNTS=5,5\nQUALITY_LEVELS=0.5\n")
            )

    def test_population_file_resolved(self, write_scenario, tmp_path):
        """Test a relative snapshot path is resolved against the scenario."""
        dump_population(generate_uniform_population(5, 10, seed=1), tmp_path / "pop.csv")
        scenario = services.load_scenario(write_scenario("SEEDS=1\nPOPULATION_FILE=pop.csv\n"))
        assert scenario.population_file == str(tmp_path / "pop.csv")

    def test_missing_population_file(self, write_scenario):
        """Test a snapshot that does not exist is a configuration error."""
        with pytest.raises(ConfigurationError):
            services.load_scenario(write_scenario("SEEDS=1\nPOPULATION_FILE=absent.csv\n"))

    def test_snapshot_arrivals_beyond_rounds(self, write_scenario, tmp_path):
        """Test replayed workers must arrive within the task."""
        dump_population(generate_uniform_population(40, 10, seed=1), tmp_path / "pop.csv")
        with pytest.raises(ConfigurationError) as exc_info:
            services.load_scenario(write_scenario("SEEDS=1\nROUNDS=2\nPOPULATION_FILE=pop.csv\n"))
        assert "arrive after step 2" in str(exc_info.value)

    def test_first_round_ratio_above_group_share(self, write_scenario):
        """Test FIRST_ROUND_RATIO is capped at one group's share of B."""
        with pytest.raises(ConfigurationError) as exc_info:
            services.load_scenario(write_scenario("SEEDS=1\nFIRST_ROUND_RATIO=0.9\n"))
        assert "first_round_ratio" in str(exc_info.value)
        scenario = services.load_scenario(write_scenario("SEEDS=1\nFIRST_ROUND_RATIO=0.5\n"))
        assert scenario.task_config().first_round_budget == pytest.approx(62.5)

    def test_empty_quality_mix(self, write_scenario):
        """Test a quality mix needs at least one worker."""
        with pytest.raises(ConfigurationError):
            services.load_scenario(
                write_scenario("SEEDS=1\nPOPULATION=quality_mix\nQUALITY_COUNTS=0,0,0,0\n")
            )

    def test_snapshot_true_arrival_beyond_rounds(self, write_scenario, tmp_path):
        """Test a worker whose true arrival falls after T is rejected even if it declares early."""
        (tmp_path / "pop.csv").write_text(
            "# id,Re,b,c,a,quality,a_declared\n0,0.5,0.3,0.3,1,0.5,1\n1,0.5,0.3,0.3,3,0.5,1\n",
            encoding="utf-8",
        )
        with pytest.raises(ConfigurationError) as exc_info:
            services.load_scenario(write_scenario("SEEDS=1\nROUNDS=2\nPOPULATION_FILE=pop.csv\n"))
        assert "workers [1] arrive after step 2" in str(exc_info.value)


class TestRunScenario:
    """Tests for run_scenario and sweep_scenario."""

    def test_mechanism_then_seed_order(self, small_scenario):
        """Test rows come in mechanism-then-seed order."""
        rows = services.run_scenario(services.load_scenario(small_scenario))
        assert [(row.mechanism, row.seed) for row in rows] == [
            ("online", 1),
            ("online", 2),
            ("bid_greedy", 1),
            ("bid_greedy", 2),
        ]
        assert all(row.n_workers == 30 and row.T == 5 for row in rows)
        assert all(row.total_paid <= 60.0 + 1e-9 for row in rows)

    def test_deterministic(self, small_scenario):
        """Test identical scenarios give identical rows."""
        scenario = services.load_scenario(small_scenario)
        assert services.run_scenario(scenario) == services.run_scenario(scenario)

    def test_replayed_snapshot(self, write_scenario, tmp_path):
        """Test a population file replaces generation for every seed."""
        dump_population(generate_uniform_population(25, 6, seed=3), tmp_path / "pop.csv")
        scenario = services.load_scenario(
            write_scenario("SEEDS=1,2\nROUNDS=6\nBUDGET=40\nPOPULATION_FILE=pop.csv\n")
        )
        first, second = services.run_scenario(scenario)
        assert first.n_workers == 25
        assert first.values()[2:] == second.values()[2:]

    def test_sweep_budget(self, small_scenario):
        """Test one block of rows per sweep value."""
        scenario = services.load_scenario(small_scenario, {"sweep_values": "30,90"})
        rows = services.sweep_scenario(scenario)
        assert [row.B for row in rows] == [30.0] * 4 + [90.0] * 4

    def test_sweep_workers(self, small_scenario):
        """Test sweeping the population size."""
        scenario = services.load_scenario(
            small_scenario, {"sweep_parameter": "workers", "sweep_values": "10,20"}
        )
        assert {row.n_workers for row in services.sweep_scenario(scenario)} == {10, 20}

    def test_sweep_without_values(self, small_scenario):
        """Test a sweep needs values."""
        with pytest.raises(ConfigurationError):
            services.sweep_scenario(services.load_scenario(small_scenario))


class TestCsvOutput:
    """Tests for CSV rendering."""

    def test_run_row_header(self):
        """Test the per-run column order."""
        assert RunRow.columns() == (
            "seed",
            "mechanism",
            "B",
            "T",
            "n_workers",
            "total_paid",
            "utility",
            "unit_payment_utility",
            "n_winners",
            "quality_proportion",
        )

    def test_render(self):
        """Test floats keep full precision and missing values are empty."""
        row = RunRow(1, "online", 125.0, 10, 3, 0.1, 2.0, 20.0, 2, None)
        text = services.render_csv(RunRow.columns(), [row.values()])
        assert text.splitlines()[1] == "1,online,125.0,10,3,0.1,2.0,20.0,2,"

    def test_write_creates_directories(self, tmp_path):
        """Test parent directories are created."""
        path = services.write_csv(
            tmp_path / "nested" / "t.csv", Table1Row.columns(), [Table1Row("online", 3, 0.5).values()]
        )
        assert path.read_text() == "mechanism,tasks_scored,mean_proportion\nonline,3,0.5\n"


class TestCommands:
    """Tests for the management commands."""

    def test_run(self, small_scenario, tmp_path):
        """Test run writes one row per (mechanism, seed) pair."""
        out = tmp_path / "run.csv"
        stdout = StringIO()
        call_command("run", config=small_scenario, out=out, stdout=stdout)
        lines = out.read_text().splitlines()
        assert lines[0].startswith("seed,mechanism,B,T")
        assert len(lines) == 5
        assert str(out) in stdout.getvalue()

    def test_run_mechanism_override(self, small_scenario, tmp_path):
        """Test --mechanism replaces the scenario's list."""
        out = tmp_path / "run.csv"
        call_command("run", config=small_scenario, out=out, mechanism="vanilla", seeds="5")
        assert out.read_text().splitlines()[1].startswith("5,vanilla,")

    def test_default_output_directory(self, small_scenario, tmp_path, settings):
        """Test output falls back to the configured directory."""
        settings.FEDAUCTION_OUTPUT_DIR = str(tmp_path / "results")
        call_command("sweep", config=small_scenario, values="40", stdout=StringIO())
        assert (tmp_path / "results" / "scenario_sweep.csv").is_file()

    def test_invalid_scenario_exit_code(self, write_scenario):
        """Test configuration errors exit with status 2."""
        with pytest.raises(CommandError) as exc_info:
            call_command("run", config=write_scenario("SEEDS=\n"))
        assert exc_info.value.returncode == 2

    def test_first_round_ratio_above_group_share_exit_code(self, write_scenario):
        """Test a first-round ratio above 0.5 exits with status 2."""
        with pytest.raises(CommandError) as exc_info:
            call_command("run", config=write_scenario("SEEDS=1\nFIRST_ROUND_RATIO=0.9\n"))
        assert exc_info.value.returncode == 2

    def test_zero_trials_exit_code(self, small_scenario):
        """Test --trials 0 is a configuration error."""
        with pytest.raises(CommandError) as exc_info:
            call_command("properties", config=small_scenario, trials=0)
        assert exc_info.value.returncode == 2

    def test_unknown_property_mechanism(self, small_scenario):
        """Test only property-checkable mechanisms are accepted."""
        with pytest.raises(CommandError) as exc_info:
            call_command("properties", config=small_scenario, trials=2, mechanism="vanilla")
        assert exc_info.value.returncode == 2

    def test_properties_pass(self, small_scenario, tmp_path):
        """Test a short campaign prints six passing summary lines."""
        out = tmp_path / "props.txt"
        stdout = StringIO()
        call_command("properties", config=small_scenario, trials=5, out=out, stdout=stdout)
        lines = stdout.getvalue().splitlines()
        assert len(lines) == 6
        assert all(" PASS " in line for line in lines)
        assert out.read_text() == stdout.getvalue()

    @pytest.mark.slow
    def test_broken_control_exit_code(self, small_scenario):
        """Test the first-price control fails with status 1."""
        with pytest.raises(CommandError) as exc_info:
            call_command(
                "properties",
                config=small_scenario,
                trials=1000,
                mechanism="broken-first-price",
                stdout=StringIO(),
            )
        assert exc_info.value.returncode == 1
        assert "cost_truthfulness" in str(exc_info.value)

    def test_table1(self, write_scenario, tmp_path):
        """Test table1 writes one row per mechanism."""
        config = write_scenario(
            "MECHANISMS=online,bid_greedy\nSEEDS=1\nPOPULATION=quality_mix\n"
            "QUALITY_COUNTS=5,5,5,5\nBUDGET=40\nNUM_TASKS=8\nWARMUP_TASKS=2\n"
        )
        out = tmp_path / "t1.csv"
        call_command("table1", config=config, out=out, stdout=StringIO())
        lines = out.read_text().splitlines()
        assert lines[0] == "mechanism,tasks_scored,mean_proportion"
        assert [line.split(",")[0] for line in lines[1:]] == ["online", "bid_greedy"]


@pytest.mark.slow
class TestMechanismOrdering:
    """Tests for the headline comparisons between mechanisms."""

    def _mean_unit_utility(self, rows, mechanism):
        return mean(row.unit_payment_utility for row in rows if row.mechanism == mechanism)

    def test_unit_payment_utility_ordering(self):
        """Test utility per unit payment at B = 125, n = 100, T = 10 over 50 seeds."""
        scenario = ScenarioConfig(
            mechanisms="online,vanilla,bid_greedy,approx_optimal,proportional_share,rrafl",
            seeds=list(range(50)),
            budget=125.0,
        )
        rows = services.run_scenario(scenario)
        online = self._mean_unit_utility(rows, "online")
        proportional_share = self._mean_unit_utility(rows, "proportional_share")
        rrafl = self._mean_unit_utility(rows, "rrafl")

        assert self._mean_unit_utility(rows, "approx_optimal") >= online
        assert online - self._mean_unit_utility(rows, "vanilla") >= 0.05 * online
        assert online - self._mean_unit_utility(rows, "bid_greedy") >= 0.05 * online
        assert abs(online - proportional_share) <= 0.3 * proportional_share
        assert abs(online - rrafl) <= 0.3 * rrafl

    def test_table1_quality_proportions(self):
        """Test the shipped quality-mix scenario keeps top-accuracy winners dominant online."""
        scenario = services.load_scenario(
            SCENARIOS_DIR / "table1.env", {"mechanisms": "online,vanilla,bid_greedy"}
        )
        assert (scenario.budget, scenario.num_tasks, scenario.warmup_tasks) == (80.0, 70, 5)
        assert scenario.quality_counts == (15, 5, 5, 5)

        online, vanilla, greedy = services.table1(scenario)
        assert online.mean_proportion >= 0.85
        assert greedy.mean_proportion <= 0.5
        assert online.mean_proportion >= vanilla.mean_proportion
