"""Single-file model checkpoints.

Layout (all integers little-endian)::

    bytes 0-7    magic  b"RLSPKCKP"
    bytes 8-11   uint32 format version (currently 1)
    bytes 12-19  uint64 header length H
    next H bytes UTF-8 JSON header (sorted keys)
    remainder    float64 little-endian parameter data, concatenated in
                 header["params"] order

The header holds ``model`` (the ModelConfig fields), ``vocab`` tokens,
``vocab_counts``, ``labels``, an optional ``extra`` dict, and per-parameter
``{"name", "shape"}`` entries.  Writing the same model twice yields the
same bytes.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import Vocabulary
from .models import DialogModel, ModelConfig, build_model

MAGIC = b"RLSPKCKP"
VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    config: ModelConfig
    state: dict[str, np.ndarray]
    vocab: Vocabulary
    labels: list[str]
    extra: dict = field(default_factory=dict)

    def build(self) -> DialogModel:
        model = build_model(self.config)
        model.load_state(self.state)
        return model


def dumps(ck: Checkpoint) -> bytes:
    names = list(ck.state)
    header = {
        "model": ck.config.to_dict(),
        "vocab": ck.vocab.tokens,
        "vocab_counts": ck.vocab.counts,
        "labels": list(ck.labels),
        "extra": ck.extra,
        "params": [{"name": k, "shape": list(ck.state[k].shape)} for k in names],
    }
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    body = b"".join(np.ascontiguousarray(ck.state[k], dtype="<f8").tobytes() for k in names)
    return MAGIC + struct.pack("<IQ", VERSION, len(hbytes)) + hbytes + body


def loads(data: bytes) -> Checkpoint:
    if data[:8] != MAGIC:
        raise CheckpointError("not a checkpoint (bad magic)")
    if len(data) < 20:
        raise CheckpointError("truncated checkpoint header")
    version, hlen = struct.unpack("<IQ", data[8:20])
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    if 20 + hlen > len(data):
        raise CheckpointError("truncated checkpoint header")
    try:
        header = json.loads(data[20:20 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint header: {exc}") from None
    offset = 20 + hlen
    state = {}
    for entry in header["params"]:
        shape = tuple(entry["shape"])
        size = int(np.prod(shape, dtype=np.int64)) * 8
        if offset + size > len(data):
            raise CheckpointError(f"truncated checkpoint at parameter {entry['name']}")
        state[entry["name"]] = np.frombuffer(data, dtype="<f8", count=size // 8,
                                             offset=offset).reshape(shape).astype(np.float64)
        offset += size
    if offset != len(data):
        raise CheckpointError("trailing bytes after parameter data")
    return Checkpoint(
        config=ModelConfig(**header["model"]),
        state=state,
        vocab=Vocabulary(header["vocab"], header["vocab_counts"]),
        labels=header["labels"],
        extra=header.get("extra", {}),
    )


def save(path: str | Path, model: DialogModel, vocab: Vocabulary, labels, extra=None) -> bytes:
    data = dumps(Checkpoint(model.cfg, model.state(), vocab, list(labels), extra or {}))
    Path(path).write_bytes(data)
    return data


def load(path: str | Path) -> Checkpoint:
    return loads(Path(path).read_bytes())
