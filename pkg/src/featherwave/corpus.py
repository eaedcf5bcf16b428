"""Deterministic synthetic test signals.

The training smoke corpus is generated rather than shipped as binary audio;
``write_corpus`` materialises it as 16-bit WAV files.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .wavio import read_wav_pcm, to_pcm16, write_wav_pcm


def two_tone(seconds: float = 10.0, sample_rate: int = 24000, seed: int = 0) -> np.ndarray:
    """Two slowly gliding tones with syllable-rate amplitude envelopes, 16-bit quantised.

    ``seed`` sets the starting phases.
    """
    rng = np.random.default_rng(seed)
    n = int(round(seconds * sample_rate))
    t = np.arange(n) / sample_rate
    f1 = 180.0 + 40.0 * np.sin(2 * np.pi * 0.3 * t)
    f2 = 1250.0 + 300.0 * np.sin(2 * np.pi * 0.17 * t + 1.0)
    ph1 = 2 * np.pi * np.cumsum(f1) / sample_rate + rng.uniform(0, 2 * np.pi)
    ph2 = 2 * np.pi * np.cumsum(f2) / sample_rate + rng.uniform(0, 2 * np.pi)
    env1 = 0.5 + 0.5 * np.sin(2 * np.pi * 2.1 * t) ** 2
    env2 = 0.5 + 0.5 * np.cos(2 * np.pi * 1.3 * t) ** 2
    x = 0.3 * env1 * np.sin(ph1) + 0.15 * env2 * np.sin(ph2)
    return to_pcm16(x).astype(np.float64) / 32768.0


def vowel(seconds: float = 2.0, sample_rate: int = 24000, f0: float = 120.0,
          formants=((700, 80), (1220, 90), (2600, 120)), seed: int = 0) -> np.ndarray:
    """Glottal pulse train with vibrato through a cascade of two-pole formant resonators."""
    rng = np.random.default_rng(seed)
    n = int(round(seconds * sample_rate))
    t = np.arange(n) / sample_rate
    inst_f0 = f0 * (1.0 + 0.03 * np.sin(2 * np.pi * 5.0 * t))
    phase = np.cumsum(inst_f0) / sample_rate
    src = np.diff(np.floor(phase), prepend=0.0)
    src += 0.01 * rng.standard_normal(n)
    y = src
    for freq, bw in formants:
        r = np.exp(-np.pi * bw / sample_rate)
        a1 = 2 * r * np.cos(2 * np.pi * freq / sample_rate)
        a2 = -r * r
        out = np.zeros(n)
        y1 = y2 = 0.0
        for i, v in enumerate(y.tolist()):
            y0 = v + a1 * y1 + a2 * y2
            out[i] = y0
            y2, y1 = y1, y0
        y = out
    y *= 0.4 / np.max(np.abs(y))
    return to_pcm16(y).astype(np.float64) / 32768.0


def write_corpus(directory, seconds: float = 10.0, sample_rate: int = 24000) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / "two_tone.wav"
    write_wav_pcm(path, to_pcm16(two_tone(seconds, sample_rate)), sample_rate)
    return [path]


def load_corpus(directory) -> list[tuple[np.ndarray, int]]:
    files = sorted(Path(directory).glob("*.wav"))
    out = []
    for f in files:
        pcm, rate = read_wav_pcm(f)
        out.append((pcm.astype(np.float64) / 32768.0, rate))
    return out
