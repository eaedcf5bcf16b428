"""Cosine-modulated pseudo-QMF analysis/synthesis filterbank."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class FilterBankError(ValueError):
    pass


@dataclass(frozen=True)
class PrototypeFilter:
    taps: np.ndarray
    kaiser_beta: float
    cutoff_ratio: float

    @property
    def length(self) -> int:
        return len(self.taps)


def design_prototype(length: int = 63, kaiser_beta: float = 9.0,
                     cutoff_ratio: float = 0.142, n_bands: int = 4) -> PrototypeFilter:
    """Kaiser-windowed sinc lowpass, cutoff given as a fraction of Nyquist.

    Taps are normalised to unit DC gain.
    """
    if length % 2 == 0 or length < 4 * n_bands:
        raise FilterBankError(f"prototype length must be odd and >= {4 * n_bands}, got {length}")
    if not 0.0 < cutoff_ratio < 0.5:
        raise FilterBankError(f"cutoff_ratio must lie in (0, 0.5), got {cutoff_ratio}")
    centre = (length - 1) / 2
    m = np.arange(length) - centre
    taps = cutoff_ratio * np.sinc(cutoff_ratio * m) * np.kaiser(length, kaiser_beta)
    taps /= taps.sum()
    # exact symmetry regardless of rounding in sinc/kaiser
    taps = 0.5 * (taps + taps[::-1])
    taps.setflags(write=False)
    return PrototypeFilter(taps, float(kaiser_beta), float(cutoff_ratio))


class FilterBank:
    """``n_bands`` analysis and synthesis filters derived from one prototype.

    The analysis/synthesis cascade delays the signal by ``group_delay``
    samples; callers trim it.
    """

    def __init__(self, n_bands: int = 4, prototype: PrototypeFilter | None = None):
        if prototype is None:
            prototype = design_prototype(n_bands=n_bands)
        self.n_bands = n_bands
        self.prototype = prototype
        L = prototype.length
        n = np.arange(L) - (L - 1) / 2
        k = np.arange(n_bands)[:, None]
        arg = (2 * k + 1) * np.pi / (2 * n_bands) * n
        phase = (-1.0) ** k * np.pi / 4
        self.analysis = 2 * prototype.taps * np.cos(arg + phase)
        self.synthesis = 2 * prototype.taps * np.cos(arg - phase)
        self.analysis.setflags(write=False)
        self.synthesis.setflags(write=False)
        self.group_delay = L - 1

    @classmethod
    def from_config(cls, cfg) -> "FilterBank":
        proto = design_prototype(cfg.fb_taps, cfg.fb_beta, cfg.fb_cutoff, cfg.n_bands)
        return cls(cfg.n_bands, proto)

    @property
    def taps(self) -> int:
        return self.prototype.length

    def analyze(self, x: np.ndarray) -> np.ndarray:
        """Split ``x`` into an ``(n_bands, len(x) // n_bands)`` array."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1 or len(x) % self.n_bands:
            raise FilterBankError(
                f"input length {len(x)} must be a multiple of n_bands={self.n_bands}")
        out = np.empty((self.n_bands, len(x) // self.n_bands))
        for b in range(self.n_bands):
            out[b] = np.convolve(x, self.analysis[b])[: len(x)][:: self.n_bands]
        return out

    def synthesize(self, g: np.ndarray) -> np.ndarray:
        """Merge subbands back to a fullband signal of length ``n_bands * g.shape[1]``.

        The output is aligned with the analysed input delayed by ``group_delay``.
        """
        g = np.asarray(g, dtype=np.float64)
        if g.ndim != 2 or g.shape[0] != self.n_bands:
            raise FilterBankError(
                f"expected {self.n_bands} subband channels, got shape {g.shape}")
        n_out = g.shape[1] * self.n_bands
        y = np.zeros(n_out)
        up = np.zeros(n_out)
        for b in range(self.n_bands):
            up[:] = 0.0
            up[:: self.n_bands] = g[b] * self.n_bands
            y += np.convolve(up, self.synthesis[b])[:n_out]
        return y


def pad_to_multiple(x: np.ndarray, n: int) -> np.ndarray:
    rem = len(x) % n
    if rem == 0:
        return np.asarray(x, dtype=np.float64)
    return np.concatenate([x, np.zeros(n - rem)])
