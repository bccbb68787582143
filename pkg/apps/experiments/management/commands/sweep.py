"""
Run a scenario across a list of budgets or worker counts.
"""

from django.core.management.base import CommandParser

from apps.common.exceptions import ConfigurationError
from apps.experiments.management.base import ScenarioCommand
from apps.experiments.models import RunRow
from apps.experiments.services import sweep_scenario, write_csv


class Command(ScenarioCommand):
    help = "Sweep a scenario over budget or worker count and write CSV"

    output_suffix = "_sweep"

    def add_arguments(self, parser: CommandParser) -> None:
        super().add_arguments(parser)
        parser.add_argument("--mechanism", help="Comma-separated mechanisms replacing the scenario's")
        parser.add_argument("--values", help="Comma-separated sweep values replacing the scenario's")

    def overrides(self, options: dict) -> dict[str, object]:
        return {
            **super().overrides(options),
            "mechanisms": options.get("mechanism"),
            "sweep_values": options.get("values"),
        }

    def handle(self, *args, **options):
        scenario = self.load(options)
        try:
            rows = sweep_scenario(scenario, jobs=options["jobs"])
        except ConfigurationError as exc:
            raise self.config_error(exc) from exc
        path = write_csv(
            self.output_path(options, scenario),
            RunRow.columns(),
            (row.values() for row in rows),
        )
        self.stdout.write(str(path))
