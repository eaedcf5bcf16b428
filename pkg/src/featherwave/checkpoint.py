"""Binary checkpoint format.

Layout (little-endian)::

    b"FWCK"  u32 version
    u32 config_len, config JSON (UTF-8)
    u32 n_tensors
    per tensor: u32 name_len, name (UTF-8), u8 dtype code, u8 rank,
                u32 dims[rank], raw data

Block masks are stored as ``u8`` tensors under ``mask.*`` names.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import RunConfig

MAGIC = b"FWCK"
VERSION = 1
DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8"), 2: np.dtype("u1"), 3: np.dtype("<i8")}
CODES = {np.dtype(v).str: k for k, v in DTYPES.items()}


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    config: RunConfig
    params: dict[str, np.ndarray]
    masks: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def block_mask(self):
        return self.masks.get("gru.w_hh")


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    cfg = ckpt.config.to_json().encode("utf-8")
    out = [MAGIC, struct.pack("<I", VERSION), struct.pack("<I", len(cfg)), cfg]
    tensors = list(ckpt.params.items()) + [(f"mask.{k}", v) for k, v in ckpt.masks.items()]
    out.append(struct.pack("<I", len(tensors)))
    for name, arr in tensors:
        arr = np.asarray(arr)
        dt = arr.dtype.newbyteorder("<") if arr.dtype.itemsize > 1 else arr.dtype
        code = CODES.get(np.dtype(dt).str)
        if code is None:
            raise CheckpointError(f"unsupported dtype {arr.dtype} for {name}")
        raw = name.encode("utf-8")
        out.append(struct.pack("<I", len(raw)) + raw)
        out.append(struct.pack("<BB", code, arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(np.ascontiguousarray(arr, dtype=DTYPES[code]).tobytes())
    Path(path).write_bytes(b"".join(out))


def load_checkpoint(path) -> Checkpoint:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    if data[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic")
    try:
        version, clen = struct.unpack_from("<II", data, 4)
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported version {version}")
        pos = 12
        cfg = RunConfig.from_dict(json.loads(data[pos:pos + clen].decode("utf-8")))
        pos += clen
        (count,) = struct.unpack_from("<I", data, pos)
        pos += 4
        params, masks = {}, {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<I", data, pos)
            pos += 4
            name = data[pos:pos + nlen].decode("utf-8")
            pos += nlen
            code, rank = struct.unpack_from("<BB", data, pos)
            pos += 2
            dims = struct.unpack_from(f"<{rank}I", data, pos)
            pos += 4 * rank
            dt = DTYPES[code]
            nbytes = dt.itemsize * int(np.prod(dims, dtype=np.int64))
            if pos + nbytes > len(data):
                raise CheckpointError(f"{path}: truncated tensor {name}")
            arr = np.frombuffer(data, dtype=dt, count=nbytes // dt.itemsize, offset=pos)
            arr = arr.reshape(dims).astype(dt.newbyteorder("="))
            pos += nbytes
            if name.startswith("mask."):
                masks[name[5:]] = arr
            else:
                params[name] = arr
    except (struct.error, KeyError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt checkpoint ({exc})") from None
    return Checkpoint(cfg, params, masks)
