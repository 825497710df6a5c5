"""Run-scoped tracing context.

Keeps the current run id and training stage in contextvars so that every
structlog line emitted during a run carries them, and exposes OpenTelemetry
spans for coarse phases (stages, evaluation). Without an SDK configured the
spans are no-ops.
"""

import uuid
from collections.abc import Iterator
from contextlib import contextmanager
from contextvars import ContextVar
from typing import Any

import structlog
from opentelemetry import trace as otel_trace

run_id_ctx: ContextVar[str | None] = ContextVar("run_id", default=None)
stage_ctx: ContextVar[int | None] = ContextVar("stage", default=None)

_tracer = otel_trace.get_tracer("caad")


def get_run_id() -> str | None:
    """Get the current run id from context."""
    return run_id_ctx.get()


def set_run_id(value: str | None) -> str:
    """Set the run id in context, generating one when not provided."""
    if value is None:
        value = uuid.uuid4().hex
    run_id_ctx.set(value)
    structlog.contextvars.bind_contextvars(run_id=value)
    return value


def set_stage(stage: int | None) -> None:
    """Record the active training stage for log correlation."""
    stage_ctx.set(stage)
    if stage is None:
        structlog.contextvars.unbind_contextvars("stage")
    else:
        structlog.contextvars.bind_contextvars(stage=stage)


def clear_run_context() -> None:
    """Clear run-scoped context after a command completes."""
    run_id_ctx.set(None)
    stage_ctx.set(None)
    structlog.contextvars.clear_contextvars()


def bind_contextvars_to_logging() -> dict[str, Any]:
    """Get the run contextvars as a dict for explicit structlog binding."""
    context: dict[str, Any] = {}
    if rid := run_id_ctx.get():
        context["run_id"] = rid
    if (stage := stage_ctx.get()) is not None:
        context["stage"] = stage
    return context


@contextmanager
def span(name: str, **attributes: Any) -> Iterator[None]:
    """Open an OpenTelemetry span carrying the run context as attributes."""
    attrs = {**bind_contextvars_to_logging(), **attributes}
    with _tracer.start_as_current_span(name, attributes=attrs):
        yield
