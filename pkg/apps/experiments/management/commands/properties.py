"""
Run every economic property check and fail on any violation.
"""

from django.core.management.base import CommandError, CommandParser

from apps.common.exceptions import DomainError, PropertyViolationError
from apps.experiments.management.base import EXIT_VIOLATION, ScenarioCommand
from apps.experiments.services import properties_campaign, render_reports


class Command(ScenarioCommand):
    help = "Check the economic properties of a mechanism on random instances"

    def add_arguments(self, parser: CommandParser) -> None:
        super().add_arguments(parser)
        parser.add_argument("--trials", type=int, help="Trials per property")
        parser.add_argument(
            "--mechanism",
            default="online",
            help="online, or broken_first_price as a negative control",
        )

    def overrides(self, options: dict) -> dict[str, object]:
        return {**super().overrides(options), "trials": options.get("trials")}

    def handle(self, *args, **options):
        scenario = self.load(options)
        mechanism = options["mechanism"].replace("-", "_")
        try:
            reports = properties_campaign(scenario, mechanism)
        except DomainError as exc:
            raise self.config_error(exc) from exc

        summary = render_reports(reports)
        self.stdout.write(summary, ending="")
        if options.get("out"):
            options["out"].parent.mkdir(parents=True, exist_ok=True)
            options["out"].write_text(summary, encoding="utf-8")

        failed = [report.property_id for report in reports if not report.passed]
        if failed:
            error = PropertyViolationError([str(property_id) for property_id in failed])
            raise CommandError(str(error), returncode=EXIT_VIOLATION)
