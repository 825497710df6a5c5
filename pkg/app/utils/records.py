"""Line-delimited record files: a header line followed by one JSON record per line."""

from __future__ import annotations

import os
import tempfile
from collections.abc import Iterable
from pathlib import Path
from typing import Any

import orjson
import structlog
from pydantic import BaseModel
from pydantic import ValidationError as PydanticValidationError

from app.core.errors import ParseError
from app.schemas.v1.common import FileHeader

logger = structlog.get_logger(__name__)


def atomic_write_bytes(path: Path, payload: bytes) -> None:
    """Write to a sibling temp file and rename it over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def dump_line(record: BaseModel | dict[str, Any]) -> bytes:
    data = record.model_dump(mode="json") if isinstance(record, BaseModel) else record
    return orjson.dumps(data) + b"\n"


def write_records(
    path: Path, header: FileHeader, records: Iterable[BaseModel | dict[str, Any]]
) -> int:
    """Atomically write ``header`` then ``records``; returns the record count."""
    lines = [dump_line(header)]
    lines.extend(dump_line(r) for r in records)
    atomic_write_bytes(path, b"".join(lines))
    logger.debug("records_written", path=str(path), format=header.format, count=len(lines) - 1)
    return len(lines) - 1


def read_numbered_records[T: BaseModel](
    path: Path, header: FileHeader, record_model: type[T]
) -> list[tuple[int, T]]:
    """Read and validate a record file written by ``write_records``.

    Returns ``(line_number, record)`` pairs. The header must match ``header``
    exactly; any malformed line raises ``ParseError`` carrying its 1-based
    line number. Blank lines are skipped.
    """
    with open(path, "rb") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("missing header record", line_number=1)
    try:
        found = FileHeader.model_validate(orjson.loads(lines[0]))
    except (orjson.JSONDecodeError, PydanticValidationError) as exc:
        raise ParseError(f"malformed header: {exc}", line_number=1) from exc
    if found.format != header.format or found.version != header.version:
        raise ParseError(
            f"expected {header.format} v{header.version}, found {found.format} v{found.version}",
            line_number=1,
        )

    records: list[tuple[int, T]] = []
    for index, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        try:
            records.append((index, record_model.model_validate(orjson.loads(raw))))
        except (orjson.JSONDecodeError, PydanticValidationError) as exc:
            raise ParseError(f"malformed {header.format} record: {exc}", line_number=index) from exc
    return records


def read_records[T: BaseModel](path: Path, header: FileHeader, record_model: type[T]) -> list[T]:
    return [record for _, record in read_numbered_records(path, header, record_model)]
