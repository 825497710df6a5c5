"""Logging configuration using structlog."""

import logging
import sys

import structlog

from app.core.config import LogFormat, get_settings


def setup_logging() -> None:
    """Configure structlog for the CLI and library code.

    Log lines go to stderr; stdout is reserved for command results.
    """
    settings = get_settings()

    log_level = settings.logging.level.value

    logging.basicConfig(
        format="%(message)s",
        stream=sys.stderr,
        level=getattr(logging, log_level),
    )

    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.StackInfoRenderer(),
            structlog.dev.set_exc_info,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.JSONRenderer()
            if settings.logging.format == LogFormat.JSON
            else structlog.dev.ConsoleRenderer(),
        ],
        wrapper_class=structlog.make_filtering_bound_logger(getattr(logging, log_level)),
        context_class=dict,
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )
