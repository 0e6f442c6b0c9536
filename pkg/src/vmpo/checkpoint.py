"""Single-file binary checkpoints.

Layout (little-endian)::

    b"VMPO" | u32 format version | u32 section count
    per section: u32 name length | name (utf-8) | u8 kind | u64 payload length | payload

``kind`` 0 is a float64 array, 1 is sorted-key UTF-8 JSON. Float arrays are
stored bit-exactly and JSON floats round-trip through ``repr``, so
save -> load -> save reproduces the same bytes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"VMPO"
FORMAT_VERSION = 1
SECTIONS = ("meta", "parameters", "targets", "lagrange", "popart", "optimizer", "rng")
_F64, _JSON = 0, 1


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    meta: dict
    parameters: np.ndarray
    targets: np.ndarray
    lagrange: np.ndarray
    popart: np.ndarray
    optimizer: np.ndarray
    rng: dict

    def to_bytes(self) -> bytes:
        out = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(SECTIONS))]
        for name in SECTIONS:
            value = getattr(self, name)
            if isinstance(value, dict):
                kind = _JSON
                payload = json.dumps(value, sort_keys=True, separators=(",", ":")).encode("utf-8")
            else:
                kind = _F64
                payload = np.ascontiguousarray(value, dtype="<f8").tobytes()
            key = name.encode("utf-8")
            out.append(struct.pack("<I", len(key)) + key + struct.pack("<BQ", kind, len(payload)))
            out.append(payload)
        return b"".join(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Checkpoint":
        if data[:4] != MAGIC:
            raise CheckpointError("not a V-MPO checkpoint (bad magic)")
        version, count = struct.unpack_from("<II", data, 4)
        if version != FORMAT_VERSION:
            raise CheckpointError(f"unsupported checkpoint format version {version}")
        pos = 12
        sections = {}
        try:
            for _ in range(count):
                (nlen,) = struct.unpack_from("<I", data, pos)
                pos += 4
                name = data[pos:pos + nlen].decode("utf-8")
                pos += nlen
                kind, plen = struct.unpack_from("<BQ", data, pos)
                pos += 9
                payload = data[pos:pos + plen]
                if len(payload) != plen:
                    raise CheckpointError(f"truncated section {name!r}")
                pos += plen
                if kind == _JSON:
                    sections[name] = json.loads(payload.decode("utf-8"))
                elif kind == _F64:
                    sections[name] = np.frombuffer(payload, dtype="<f8").astype(np.float64)
                else:
                    raise CheckpointError(f"unknown section kind {kind} for {name!r}")
        except struct.error as exc:
            raise CheckpointError("truncated checkpoint") from exc
        missing = set(SECTIONS) - set(sections)
        if missing:
            raise CheckpointError(f"checkpoint missing sections {sorted(missing)}")
        return cls(**{k: sections[k] for k in SECTIONS})

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "Checkpoint":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())
