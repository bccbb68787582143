"""
Quality proportion of each mechanism over a repeated task sequence.
"""

from django.core.management.base import CommandParser

from apps.experiments.management.base import ScenarioCommand
from apps.experiments.models import Table1Row
from apps.experiments.services import table1, write_csv


class Command(ScenarioCommand):
    help = "Run task sequences on a quality-mix population and write proportions as CSV"

    output_suffix = "_table1"

    def add_arguments(self, parser: CommandParser) -> None:
        super().add_arguments(parser)
        parser.add_argument("--mechanism", help="Comma-separated mechanisms replacing the scenario's")

    def overrides(self, options: dict) -> dict[str, object]:
        return {**super().overrides(options), "mechanisms": options.get("mechanism")}

    def handle(self, *args, **options):
        scenario = self.load(options)
        rows = table1(scenario, jobs=options["jobs"])
        path = write_csv(
            self.output_path(options, scenario),
            Table1Row.columns(),
            (row.values() for row in rows),
        )
        self.stdout.write(str(path))
