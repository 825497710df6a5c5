"""Binary checkpoint codec.

Layout (little-endian)::

    b"CAADCKPT" | u32 version | u32 meta_len | meta (JSON)
    | u32 blocks | { u16 name_len | name | u8 ndim | u32 dims... | f64 data }*
    | sha256 of everything above

Blocks are namespaced with a ``section/`` prefix (``model/``, ``adam_m/``, ...).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from hashlib import sha256
from pathlib import Path
from typing import Any

import numpy as np
import numpy.typing as npt
import orjson
import structlog
from pydantic import ValidationError as PydanticValidationError

from app.core.errors import CheckpointError
from app.model.config import ModelConfig
from app.model.network import CaadModel
from app.numerics.nn import Module
from app.utils.records import atomic_write_bytes

logger = structlog.get_logger(__name__)

MAGIC = b"CAADCKPT"
VERSION = 1
DIGEST_SIZE = 32

Array = npt.NDArray[np.float64]


@dataclass(frozen=True)
class Checkpoint:
    blocks: dict[str, Array]
    metadata: dict[str, Any] = field(default_factory=dict)

    def section(self, name: str) -> dict[str, Array]:
        prefix = f"{name}/"
        return {k[len(prefix) :]: v for k, v in self.blocks.items() if k.startswith(prefix)}


def encode_checkpoint(checkpoint: Checkpoint) -> bytes:
    meta = orjson.dumps(checkpoint.metadata, option=orjson.OPT_SORT_KEYS)
    parts = [MAGIC, struct.pack("<II", VERSION, len(meta)), meta]
    parts.append(struct.pack("<I", len(checkpoint.blocks)))
    for name, arr in checkpoint.blocks.items():
        raw_name = name.encode("utf-8")
        data = np.ascontiguousarray(arr, dtype="<f8")
        parts.append(struct.pack("<HB", len(raw_name), data.ndim))
        parts.append(raw_name)
        parts.append(struct.pack(f"<{data.ndim}I", *data.shape))
        parts.append(data.tobytes())
    body = b"".join(parts)
    return body + sha256(body).digest()


class _Reader:
    def __init__(self, payload: bytes) -> None:
        self.payload = payload
        self.offset = 0

    def take(self, size: int) -> bytes:
        end = self.offset + size
        if end > len(self.payload):
            raise CheckpointError("checkpoint is truncated", details={"offset": self.offset})
        chunk = self.payload[self.offset : end]
        self.offset = end
        return chunk

    def unpack(self, fmt: str) -> tuple[Any, ...]:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_checkpoint(payload: bytes) -> Checkpoint:
    if len(payload) < len(MAGIC) + DIGEST_SIZE or not payload.startswith(MAGIC):
        raise CheckpointError("not a checkpoint file (bad magic)")
    body, digest = payload[:-DIGEST_SIZE], payload[-DIGEST_SIZE:]
    if sha256(body).digest() != digest:
        raise CheckpointError("checkpoint integrity check failed")

    reader = _Reader(body)
    reader.take(len(MAGIC))
    version, meta_len = reader.unpack("<II")
    if version != VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {version}",
            details={"version": version, "supported": VERSION},
        )
    metadata = orjson.loads(reader.take(meta_len))
    (count,) = reader.unpack("<I")
    blocks: dict[str, Array] = {}
    for _ in range(count):
        name_len, ndim = reader.unpack("<HB")
        name = reader.take(name_len).decode("utf-8")
        shape = reader.unpack(f"<{ndim}I")
        size = int(np.prod(shape, dtype=np.int64))
        blocks[name] = np.frombuffer(reader.take(8 * size), dtype="<f8").reshape(shape).copy()
    if reader.offset != len(body):
        raise CheckpointError("trailing bytes after parameter blocks")
    return Checkpoint(blocks=blocks, metadata=metadata)


def save_checkpoint(path: Path, checkpoint: Checkpoint) -> None:
    atomic_write_bytes(Path(path), encode_checkpoint(checkpoint))
    logger.info("checkpoint_saved", path=str(path), blocks=len(checkpoint.blocks))


def load_checkpoint(path: Path) -> Checkpoint:
    try:
        payload = Path(path).read_bytes()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint: {e}", details={"path": str(path)}) from e
    return decode_checkpoint(payload)


def model_state(model: Module) -> dict[str, Array]:
    return {name: p.data.copy() for name, p in model.named_parameters()}


def load_model_state(model: Module, state: dict[str, Array]) -> None:
    """Copy ``state`` into the model's parameters; names and shapes must match exactly."""
    params = dict(model.named_parameters())
    missing = sorted(set(params) - set(state))
    unknown = sorted(set(state) - set(params))
    if missing or unknown:
        raise CheckpointError(
            "checkpoint parameters do not match the model",
            details={"missing": missing[:10], "unknown": unknown[:10]},
        )
    for name, p in params.items():
        if state[name].shape != p.shape:
            raise CheckpointError(
                f"shape mismatch for {name}",
                details={"expected": list(p.shape), "found": list(state[name].shape)},
            )
    for name, p in params.items():
        p.data = np.array(state[name], dtype=np.float64)


def restore_model(checkpoint: Checkpoint) -> CaadModel:
    """Rebuild the network recorded in ``checkpoint`` and load its parameters."""
    raw = checkpoint.metadata.get("model_config")
    if raw is None:
        raise CheckpointError("checkpoint carries no model config")
    try:
        config = ModelConfig.model_validate(raw)
    except PydanticValidationError as e:
        raise CheckpointError(
            "checkpoint model config is invalid", details={"error": str(e)}
        ) from e
    model = CaadModel(config)
    load_model_state(model, checkpoint.section("model"))
    return model
