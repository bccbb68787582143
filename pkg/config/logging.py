"""
Logging configuration for fedauction.

Experiment commands write CSV and reports to stdout, so every log line goes to
stderr through the standard library handlers configured in settings. Runs bind
their mechanism and seed with structlog.contextvars, merged into every event.
"""

import structlog

RENDERERS = ("json", "console")


def configure_logging(renderer: str = "json"):
    """
    Configure structured logging for the application.

    Args:
        renderer: "json" for one object per line, "console" for a terminal
    """
    if renderer not in RENDERERS:
        raise ValueError(f"Unknown log renderer {renderer!r}, expected one of {RENDERERS}")

    final = (
        structlog.dev.ConsoleRenderer(colors=False)
        if renderer == "console"
        else structlog.processors.JSONRenderer()
    )
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            final,
        ],
        wrapper_class=structlog.stdlib.BoundLogger,
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        cache_logger_on_first_use=True,
    )
