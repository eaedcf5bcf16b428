"""Pre-emphasis and per-subband mu-law quantisation with a coarse/fine index split."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class CodecError(ValueError):
    pass


def pre_emphasis(x, alpha: float = 0.85) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    y = x.copy()
    y[1:] -= alpha * x[:-1]
    return y


def de_emphasis(y, alpha: float = 0.85) -> np.ndarray:
    """Inverse of :func:`pre_emphasis`: ``x[n] = y[n] + alpha * x[n-1]``."""
    y = np.asarray(y, dtype=np.float64)
    x = np.empty_like(y)
    prev = 0.0
    for n, v in enumerate(y.tolist()):
        prev = v + alpha * prev
        x[n] = prev
    return x


@dataclass(frozen=True)
class MuLawCodec:
    """Mid-rise quantiser over the mu-law companded domain.

    ``decode`` returns bin centres, so ``encode(decode(i)) == i`` for every
    index.  ``decode_table`` is the single source of reconstruction values used
    by the closed-loop predictor.
    """

    bits: int = 10
    decode_table: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.bits < 2 or self.bits % 2:
            raise CodecError(f"bits must be even and >= 2, got {self.bits}")
        idx = np.arange(self.levels)
        table = np.array([self._decode_scalar(int(i)) for i in idx])
        table.setflags(write=False)
        object.__setattr__(self, "decode_table", table)

    @property
    def mu(self) -> int:
        return (1 << self.bits) - 1

    @property
    def levels(self) -> int:
        return 1 << self.bits

    @property
    def q_root(self) -> int:
        return 1 << (self.bits // 2)

    @property
    def zero_index(self) -> int:
        return self.levels // 2

    def _decode_scalar(self, index: int) -> float:
        v = (index + 0.5) * 2.0 / self.levels - 1.0
        mag = (math.pow(1.0 + self.mu, abs(v)) - 1.0) / self.mu
        return math.copysign(mag, v)

    def encode_scalar(self, x: float) -> int:
        x = min(max(x, -1.0), 1.0)
        comp = math.copysign(math.log1p(self.mu * abs(x)) / math.log1p(self.mu), x)
        idx = int(math.floor((comp + 1.0) * 0.5 * self.levels))
        return min(max(idx, 0), self.levels - 1)

    def encode(self, x) -> np.ndarray:
        x = np.clip(np.asarray(x, dtype=np.float64), -1.0, 1.0)
        comp = np.sign(x) * np.log1p(self.mu * np.abs(x)) / math.log1p(self.mu)
        idx = np.floor((comp + 1.0) * 0.5 * self.levels).astype(np.int64)
        return np.clip(idx, 0, self.levels - 1)

    def decode(self, index) -> np.ndarray:
        index = np.asarray(index)
        if index.size and (index.min() < 0 or index.max() >= self.levels):
            raise CodecError(f"mu-law index out of range [0, {self.levels})")
        return self.decode_table[index]

    def bin_edges(self, index: int) -> tuple[float, float]:
        """Signal-domain interval covered by ``index``."""
        def inv(v):
            return math.copysign((math.pow(1.0 + self.mu, abs(v)) - 1.0) / self.mu, v)
        lo = index * 2.0 / self.levels - 1.0
        hi = (index + 1) * 2.0 / self.levels - 1.0
        return inv(lo), inv(hi)


def split_coarse_fine(index, q: int = 32):
    index = np.asarray(index)
    if index.size and (index.min() < 0 or index.max() >= q * q):
        raise CodecError(f"index out of range [0, {q * q})")
    return index // q, index % q


def combine_coarse_fine(coarse, fine, q: int = 32):
    return np.asarray(coarse) * q + np.asarray(fine)
