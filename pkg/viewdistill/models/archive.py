"""Parameter archive - named float32 tensors behind a fingerprinted, checksummed header.

Layout (little-endian)::

    magic      8 bytes   b"VDPARAMS"
    version    u32
    fingerprint u32 length + utf-8
    metadata   u32 length + canonical JSON
    count      u32
    per tensor: u32 name length, name, u32 ndim, ndim x u64 dims, float32 values
    footer     32 bytes  sha256 of everything before it
"""

import json
import logging
import struct
from collections import OrderedDict
from pathlib import Path

import numpy as np
import torch
from pydantic import BaseModel, ConfigDict, Field, field_validator

from viewdistill.core.exceptions import ArchiveIntegrityError, FingerprintError
from viewdistill.core.hashing import canonical_json, sha256_digest

logger = logging.getLogger(__name__)

MAGIC = b"VDPARAMS"
ARCHIVE_VERSION = 1
DIGEST_SIZE = 32


class ParameterSet(BaseModel):
    """Ordered named tensors for one architecture."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    tensors: dict[str, torch.Tensor]
    version: int = ARCHIVE_VERSION
    fingerprint: str
    metadata: dict[str, str] = Field(default_factory=dict)

    @field_validator("tensors")
    @classmethod
    def check_finite(cls, v: dict[str, torch.Tensor]) -> dict[str, torch.Tensor]:
        for name, tensor in v.items():
            if tensor.is_floating_point() and not bool(torch.isfinite(tensor).all()):
                raise ValueError(f"tensor {name} holds non-finite values")
        return OrderedDict(v)

    def equals(self, other: "ParameterSet") -> bool:
        if list(self.tensors) != list(other.tensors) or self.fingerprint != other.fingerprint:
            return False
        return all(torch.equal(self.tensors[k], other.tensors[k]) for k in self.tensors)


def _pack_str(text: str) -> bytes:
    raw = text.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def encode_params(params: ParameterSet) -> bytes:
    chunks = [
        MAGIC,
        struct.pack("<I", params.version),
        _pack_str(params.fingerprint),
        _pack_str(canonical_json(params.metadata)),
        struct.pack("<I", len(params.tensors)),
    ]
    for name, tensor in params.tensors.items():
        values = tensor.detach().cpu().to(torch.float32).numpy()
        chunks.append(_pack_str(name))
        chunks.append(struct.pack("<I", values.ndim))
        chunks.append(struct.pack(f"<{values.ndim}Q", *values.shape))
        chunks.append(values.astype("<f4").tobytes())
    body = b"".join(chunks)
    return body + sha256_digest(body)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, size: int) -> bytes:
        end = self.offset + size
        if end > len(self.data):
            raise ArchiveIntegrityError("parameter archive is truncated")
        chunk = self.data[self.offset : end]
        self.offset = end
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def text(self) -> str:
        return self.take(self.u32()).decode("utf-8")


def decode_params(data: bytes, expected_fingerprint: str | None = None) -> ParameterSet:
    if len(data) < len(MAGIC) + DIGEST_SIZE or not data.startswith(MAGIC):
        raise ArchiveIntegrityError("not a parameter archive")
    body, digest = data[:-DIGEST_SIZE], data[-DIGEST_SIZE:]
    if sha256_digest(body) != digest:
        raise ArchiveIntegrityError("parameter archive checksum mismatch (truncated or corrupt)")
    reader = _Reader(body)
    reader.take(len(MAGIC))
    version = reader.u32()
    if version != ARCHIVE_VERSION:
        raise ArchiveIntegrityError(f"unsupported archive version {version}")
    fingerprint = reader.text()
    if expected_fingerprint is not None and fingerprint != expected_fingerprint:
        raise FingerprintError(
            f"archive fingerprint {fingerprint[:12]} does not match "
            f"expected architecture {expected_fingerprint[:12]}"
        )
    metadata = json.loads(reader.text())
    tensors: OrderedDict[str, torch.Tensor] = OrderedDict()
    for _ in range(reader.u32()):
        name = reader.text()
        ndim = reader.u32()
        shape = struct.unpack(f"<{ndim}Q", reader.take(8 * ndim))
        count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        values = np.frombuffer(reader.take(4 * count), dtype="<f4").reshape(shape)
        tensors[name] = torch.from_numpy(values.astype(np.float32))
    if reader.offset != len(body):
        raise ArchiveIntegrityError("trailing bytes in parameter archive")
    return ParameterSet(
        tensors=tensors, version=version, fingerprint=fingerprint, metadata=metadata
    )


def save_params(params: ParameterSet, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(encode_params(params))
    tmp.replace(path)
    logger.info(f"Saved {len(params.tensors)} tensors to {path}")
    return path


def load_params(path: Path, expected_fingerprint: str | None = None) -> ParameterSet:
    """Read an archive; with `expected_fingerprint`, reject parameters of another architecture."""
    path = Path(path)
    if not path.exists():
        raise ArchiveIntegrityError(f"parameter archive {path} does not exist")
    return decode_params(path.read_bytes(), expected_fingerprint)
