"""
Shared plumbing of the experiment management commands.
"""

from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError, CommandParser

from apps.common.exceptions import ConfigurationError, FedAuctionException
from apps.experiments.models import ScenarioConfig
from apps.experiments.services import load_scenario

EXIT_VIOLATION = 1
EXIT_CONFIG_ERROR = 2


class ScenarioCommand(BaseCommand):
    """Base command reading a scenario file and writing one CSV."""

    output_suffix = ""

    def add_arguments(self, parser: CommandParser) -> None:
        parser.add_argument("--config", required=True, type=Path, help="Scenario file")
        parser.add_argument("--out", type=Path, help="Output path")
        parser.add_argument("--seeds", help="Comma-separated seeds replacing the scenario's")
        parser.add_argument(
            "--jobs",
            type=int,
            default=settings.FEDAUCTION_JOBS,
            help="Parallel worker processes",
        )

    def overrides(self, options: dict) -> dict[str, object]:
        return {"seeds": options.get("seeds")}

    def load(self, options: dict) -> ScenarioConfig:
        try:
            return load_scenario(options["config"], self.overrides(options))
        except ConfigurationError as exc:
            raise self.config_error(exc) from exc

    def output_path(self, options: dict, scenario: ScenarioConfig) -> Path:
        """--out, then the scenario's output key, then the default directory."""
        if options.get("out"):
            return options["out"]
        if scenario.output:
            return Path(scenario.output)
        stem = options["config"].stem
        return Path(settings.FEDAUCTION_OUTPUT_DIR) / f"{stem}{self.output_suffix}.csv"

    def config_error(self, exc: FedAuctionException) -> CommandError:
        return CommandError(str(exc), returncode=EXIT_CONFIG_ERROR)
