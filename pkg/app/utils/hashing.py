"""Stable digests for configs and parameter sets."""

from __future__ import annotations

from collections.abc import Iterable
from hashlib import sha256
from typing import Any

import numpy as np
import orjson
from pydantic import BaseModel


def stable_digest(payload: Any) -> str:
    """SHA-256 of the key-sorted JSON form of ``payload``."""
    if isinstance(payload, BaseModel):
        payload = payload.model_dump(mode="json")
    return sha256(orjson.dumps(payload, option=orjson.OPT_SORT_KEYS)).hexdigest()


def arrays_digest(named: Iterable[tuple[str, np.ndarray]]) -> str:
    """SHA-256 over names, shapes and raw float64 bytes, in the given order."""
    h = sha256()
    for name, arr in named:
        data = np.ascontiguousarray(arr, dtype="<f8")
        h.update(name.encode("utf-8"))
        h.update(repr(data.shape).encode("ascii"))
        h.update(data.tobytes())
    return h.hexdigest()
