"""
Run every (mechanism, seed) pair of a scenario and write one CSV row each.
"""

from django.core.management.base import CommandParser

from apps.experiments.management.base import ScenarioCommand
from apps.experiments.models import RunRow
from apps.experiments.services import run_scenario, write_csv


class Command(ScenarioCommand):
    help = "Run a scenario and write per-run metrics as CSV"

    def add_arguments(self, parser: CommandParser) -> None:
        super().add_arguments(parser)
        parser.add_argument("--mechanism", help="Comma-separated mechanisms replacing the scenario's")

    def overrides(self, options: dict) -> dict[str, object]:
        return {**super().overrides(options), "mechanisms": options.get("mechanism")}

    def handle(self, *args, **options):
        scenario = self.load(options)
        rows = run_scenario(scenario, jobs=options["jobs"])
        path = write_csv(
            self.output_path(options, scenario),
            RunRow.columns(),
            (row.values() for row in rows),
        )
        self.stdout.write(str(path))
