"""Portable binary checkpoint format.

Layout: magic "LWVSR001"; u32 little-endian tensor count; per tensor a
u16 name length, the UTF-8 name, a u8 rank, rank u32 dims, then the
values as little-endian float32. Round-trips are bit-exact for float32
parameters.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ShapeError

MAGIC = b"LWVSR001"


def _state_of(obj):
    if hasattr(obj, "named_parameters"):
        return {name: t.data for name, t in obj.named_parameters()}
    return dict(obj)


def save_checkpoint(model_or_state, path) -> Path:
    state = _state_of(model_or_state)
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(state)))
        for name, arr in state.items():
            encoded = name.encode("utf-8")
            if len(encoded) > 0xFFFF:
                raise ShapeError(f"checkpoint: name too long: {name[:40]}...")
            arr = np.asarray(arr)
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return path


def load_checkpoint(path) -> dict:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise ShapeError(f"checkpoint: bad magic in {path}")
    off = 8
    (count,) = struct.unpack_from("<I", raw, off)
    off += 4
    state = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", raw, off)
        off += 2
        name = raw[off:off + nlen].decode("utf-8")
        off += nlen
        (rank,) = struct.unpack_from("<B", raw, off)
        off += 1
        dims = struct.unpack_from(f"<{rank}I", raw, off)
        off += 4 * rank
        size = int(np.prod(dims)) if rank else 1
        arr = np.frombuffer(raw, dtype="<f4", count=size, offset=off).reshape(dims)
        off += 4 * size
        state[name] = arr.copy()
    if off != len(raw):
        raise ShapeError(f"checkpoint: {len(raw) - off} trailing bytes in {path}")
    return state


def apply_state(model, state) -> None:
    """Load a checkpoint state dict into a model's parameters.

    Raises naming the first tensor that is missing or whose shape differs.
    """
    params = dict(model.named_parameters())
    for name, t in params.items():
        if name not in state:
            raise ShapeError(f"checkpoint: missing tensor {name}")
        arr = state[name]
        if tuple(arr.shape) != tuple(t.shape):
            raise ShapeError(f"checkpoint: shape mismatch for {name}: file {tuple(arr.shape)} vs model {tuple(t.shape)}")
    extra = [k for k in state if k not in params]
    if extra:
        raise ShapeError(f"checkpoint: unexpected tensor {extra[0]}")
    for name, t in params.items():
        t.data = state[name].astype(t.dtype, copy=True)
