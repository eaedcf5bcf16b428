"""Minimal RIFF/WAVE reader and writer: mono, 16-bit signed PCM."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np


class WavError(ValueError):
    pass


def read_wav_pcm(path) -> tuple[np.ndarray, int]:
    """Return the raw int16 samples and the sample rate."""
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavError(f"{path}: not a RIFF/WAVE file")
    pos = 12
    fmt = None
    pcm = None
    while pos + 8 <= len(data):
        cid, size = struct.unpack_from("<4sI", data, pos)
        body = data[pos + 8:pos + 8 + size]
        if len(body) < size:
            raise WavError(f"{path}: truncated chunk {cid!r}")
        if cid == b"fmt ":
            if size < 16:
                raise WavError(f"{path}: short fmt chunk")
            fmt = struct.unpack_from("<HHIIHH", body)
        elif cid == b"data":
            pcm = body
        pos += 8 + size + (size & 1)
    if fmt is None or pcm is None:
        raise WavError(f"{path}: missing fmt or data chunk")
    tag, channels, rate, _, _, bits = fmt
    if tag != 1 or bits != 16:
        raise WavError(f"{path}: only 16-bit PCM is supported (format {tag}, {bits} bits)")
    if channels != 1:
        raise WavError(f"{path}: only mono audio is supported, got {channels} channels")
    return np.frombuffer(pcm[: len(pcm) // 2 * 2], dtype="<i2").astype(np.int16), rate


def read_wav(path) -> tuple[np.ndarray, int]:
    """Float samples in [-1, 1) and the sample rate."""
    pcm, rate = read_wav_pcm(path)
    return pcm.astype(np.float64) / 32768.0, rate


def to_pcm16(x) -> np.ndarray:
    x = np.clip(np.asarray(x, dtype=np.float64), -1.0, 1.0)
    return np.clip(np.round(x * 32768.0), -32768, 32767).astype(np.int16)


def write_wav_pcm(path, pcm: np.ndarray, rate: int) -> None:
    pcm = np.asarray(pcm, dtype="<i2")
    payload = pcm.tobytes()
    header = struct.pack("<4sI4s4sIHHIIHH4sI", b"RIFF", 36 + len(payload), b"WAVE",
                         b"fmt ", 16, 1, 1, rate, rate * 2, 2, 16, b"data", len(payload))
    Path(path).write_bytes(header + payload)


def write_wav(path, x, rate: int) -> None:
    write_wav_pcm(path, to_pcm16(x), rate)
