"""Binary checkpoint format for manipulator parameters.

Layout (little-endian)::

    b"NEDM" | version u32 | count u32 | count x record
    record = name_len u32 | name utf-8 | rank u32 | dims u32[rank] | f32 payload

Network weights come first, then optimizer state (``opt.m/``, ``opt.v/``,
``opt.step/``), then run metadata (``meta.``), and finally the
normalization statistics under the reserved names ``norm.mean`` and
``norm.std``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import DTYPE, Param, ParameterStore

MAGIC = b"NEDM"
VERSION = 1
NORM_MEAN = "norm.mean"
NORM_STD = "norm.std"


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    store: ParameterStore
    norm_mean: np.ndarray
    norm_std: np.ndarray
    meta: dict = field(default_factory=dict)


def _record(name: str, arr: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(arr, dtype="<f4")
    raw = name.encode("utf-8")
    head = struct.pack(f"<I{len(raw)}sI", len(raw), raw, arr.ndim)
    dims = struct.pack(f"<{arr.ndim}I", *arr.shape)
    return head + dims + arr.tobytes()


def encode(ckpt: Checkpoint, with_optimizer: bool = True) -> bytes:
    records = []
    for name, p in ckpt.store.entries.items():
        records.append(_record(name, p.value))
    if with_optimizer:
        for name, p in ckpt.store.entries.items():
            records.append(_record(f"opt.m/{name}", p.m))
            records.append(_record(f"opt.v/{name}", p.v))
            records.append(_record(f"opt.step/{name}", np.array([p.step])))
    for key in sorted(ckpt.meta):
        records.append(_record(f"meta.{key}", np.array([ckpt.meta[key]])))
    records.append(_record(NORM_MEAN, ckpt.norm_mean))
    records.append(_record(NORM_STD, ckpt.norm_std))
    return MAGIC + struct.pack("<II", VERSION, len(records)) + b"".join(records)


def decode(buf: bytes) -> Checkpoint:
    if buf[:4] != MAGIC:
        raise CheckpointError("not a checkpoint: bad magic bytes")
    version, count = struct.unpack_from("<II", buf, 4)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    off = 12
    tensors = {}
    try:
        for _ in range(count):
            (n,) = struct.unpack_from("<I", buf, off)
            off += 4
            name = buf[off:off + n].decode("utf-8")
            off += n
            (rank,) = struct.unpack_from("<I", buf, off)
            off += 4
            dims = struct.unpack_from(f"<{rank}I", buf, off)
            off += 4 * rank
            size = int(np.prod(dims, dtype=np.int64))
            arr = np.frombuffer(buf, dtype="<f4", count=size, offset=off).reshape(dims)
            off += 4 * size
            tensors[name] = arr.astype(DTYPE)
    except (struct.error, ValueError) as exc:
        raise CheckpointError(f"truncated or corrupt checkpoint: {exc}") from None
    if off != len(buf):
        raise CheckpointError(f"{len(buf) - off} trailing bytes after {count} records")
    if NORM_MEAN not in tensors or NORM_STD not in tensors:
        raise CheckpointError("checkpoint lacks normalization statistics")

    store = ParameterStore()
    meta = {}
    for name, arr in tensors.items():
        if name.startswith(("opt.", "norm.")):
            continue
        if name.startswith("meta."):
            meta[name[5:]] = float(arr[0])
            continue
        p = Param(arr.copy())
        if f"opt.m/{name}" in tensors:
            p.m = tensors[f"opt.m/{name}"].copy()
            p.v = tensors[f"opt.v/{name}"].copy()
            p.step = int(tensors[f"opt.step/{name}"][0])
        store.entries[name] = p
    return Checkpoint(store, tensors[NORM_MEAN].copy(), tensors[NORM_STD].copy(), meta)


def save(path, ckpt: Checkpoint, with_optimizer: bool = True) -> None:
    Path(path).write_bytes(encode(ckpt, with_optimizer))


def load(path) -> Checkpoint:
    return decode(Path(path).read_bytes())
