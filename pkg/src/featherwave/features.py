"""Log-mel features and per-band LPC estimation from mel frames."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

LOG_FLOOR = 1e-5


class FeatureError(ValueError):
    pass


@dataclass
class MelSpectrogram:
    frames: np.ndarray  # (n_frames, n_mels), natural-log energies
    sample_rate: int
    hop: int

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def n_mels(self) -> int:
        return self.frames.shape[1]


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(sample_rate: int, fft_size: int, n_mels: int,
                   f_min: float = 0.0, f_max: float | None = None) -> np.ndarray:
    """HTK-spaced triangular filters with unit peak, shape ``(n_mels, fft_size // 2 + 1)``."""
    if f_max is None:
        f_max = sample_rate / 2
    edges = mel_to_hz(np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_mels + 2))
    freqs = np.arange(fft_size // 2 + 1) * sample_rate / fft_size
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    up = (freqs - lo) / (mid - lo)
    down = (hi - freqs) / (hi - mid)
    return np.maximum(0.0, np.minimum(up, down))


def mel_band_centers(sample_rate: int, n_mels: int) -> np.ndarray:
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate / 2), n_mels + 2))
    return edges[1:-1]


def melspectrogram(x, cfg) -> MelSpectrogram:
    """Centred STFT (Hann, reflection padding) -> power -> mel -> log.

    Frame ``t`` is centred on sample ``t * hop``; there are ``ceil(len(x) / hop)``
    frames.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or len(x) < cfg.win:
        raise FeatureError(f"need a mono signal of at least win={cfg.win} samples")
    n_frames = -(-len(x) // cfg.hop)
    half = cfg.win // 2
    padded = np.pad(x, (half, half), mode="reflect")
    need = (n_frames - 1) * cfg.hop + cfg.win
    if len(padded) < need:
        padded = np.pad(padded, (0, need - len(padded)))
    idx = np.arange(cfg.win)[None, :] + cfg.hop * np.arange(n_frames)[:, None]
    window = np.hanning(cfg.win + 1)[:-1]
    spec = np.fft.rfft(padded[idx] * window, n=cfg.fft_size, axis=1)
    power = spec.real ** 2 + spec.imag ** 2
    fb = mel_filterbank(cfg.sample_rate, cfg.fft_size, cfg.n_mels)
    mel = power @ fb.T
    return MelSpectrogram(np.log(np.maximum(mel, LOG_FLOOR)), cfg.sample_rate, cfg.hop)


def levinson_durbin(r, order: int, return_error: bool = False):
    """Solve the Toeplitz normal equations for prediction ``p[n] = sum_k a[k] x[n-k]``.

    Reflection coefficients with magnitude >= 1 are clamped to +-0.999.
    """
    r = np.asarray(r, dtype=np.float64)
    if r[0] <= 0:
        raise FeatureError("autocorrelation r[0] must be positive")
    if len(r) < order + 1:
        raise FeatureError(f"need {order + 1} autocorrelation lags, got {len(r)}")
    a = np.zeros(order)
    err = r[0]
    for i in range(order):
        acc = r[i + 1] - np.dot(a[:i], r[i:0:-1])
        k = acc / err
        if abs(k) >= 1.0:
            k = math.copysign(0.999, k)
        a[:i] = a[:i] - k * a[:i][::-1]
        a[i] = k
        err *= 1.0 - k * k
    if return_error:
        return a, err
    return a


def reflection_coefficients(a) -> np.ndarray:
    """Step-down recursion; all magnitudes < 1 iff the synthesis filter is stable."""
    a = np.array(a, dtype=np.float64)
    ks = np.zeros(len(a))
    for i in range(len(a) - 1, -1, -1):
        k = a[i]
        ks[i] = k
        if i == 0:
            break
        if abs(k) >= 1.0:
            ks[:i] = np.inf
            break
        a = (a[:i] + k * a[:i][::-1]) / (1.0 - k * k)
    return ks


class MelLpc:
    """Per-band LPC from log-mel frames via a ridge pseudo-inverse of the mel matrix.

    For each band, the recovered linear power spectrum is cut to the band's
    FFT bins and re-expressed on the decimated subband's frequency axis.
    Odd bands are spectrally inverted by decimation, so their axis is flipped.
    """

    def __init__(self, cfg):
        self.cfg = cfg
        self.n_bands = cfg.n_bands
        self.order = cfg.lpc_order
        fb = mel_filterbank(cfg.sample_rate, cfg.fft_size, cfg.n_mels)
        gram = fb @ fb.T + cfg.mel_ridge * np.eye(cfg.n_mels)
        self.pinv = np.linalg.solve(gram, fb).T  # (n_bins, n_mels)
        freqs = np.arange(cfg.fft_size // 2 + 1) * cfg.sample_rate / cfg.fft_size
        omega_full = 2 * np.pi * freqs / cfg.sample_rate
        a = cfg.preemph
        self.preemph_gain = 1.0 + a * a - 2.0 * a * np.cos(omega_full)
        width = cfg.sample_rate / (2 * cfg.n_bands)
        bin_hz = cfg.sample_rate / cfg.fft_size
        self.band_bins = []
        self.band_omega = []
        for b in range(cfg.n_bands):
            sel = np.nonzero((freqs >= b * width) & (freqs < (b + 1) * width))[0]
            local = ((sel + 0.5) * bin_hz - b * width) / width * np.pi
            if b % 2:
                local = np.pi - local
            self.band_bins.append(sel)
            self.band_omega.append(local)
        f_sub = cfg.sample_rate / cfg.n_bands
        k = np.arange(self.order + 1)
        self.lag_window = np.exp(-0.5 * (2 * np.pi * k * cfg.lag_hz / f_sub) ** 2)

    def linear_power(self, frame: np.ndarray) -> np.ndarray:
        power = self.pinv @ np.exp(np.asarray(frame, dtype=np.float64))
        return np.maximum(power, 0.0) * self.preemph_gain

    def band_autocorrelation(self, band_power: np.ndarray, band: int,
                             lag_window: bool = True) -> np.ndarray:
        """Inverse real-even transform of one band's power spectrum, lags 0..order."""
        band_power = np.asarray(band_power, dtype=np.float64)
        if not np.any(band_power > 0):
            r = np.zeros(self.order + 1)
            r[0] = 1.0
            return r
        k = np.arange(self.order + 1)[:, None]
        r = np.cos(k * self.band_omega[band][None, :]) @ band_power
        if lag_window:
            r = r * self.lag_window
            r[0] *= 1.0 + 1e-4
        return r

    def mel_to_band_autocorrelation(self, frame: np.ndarray, band: int) -> np.ndarray:
        if not 0 <= band < self.n_bands:
            raise FeatureError(f"band {band} out of range")
        power = self.linear_power(frame)
        return self.band_autocorrelation(power[self.band_bins[band]], band)

    def plan(self, mel: MelSpectrogram | np.ndarray) -> np.ndarray:
        """LPC coefficients ``(n_frames, n_bands, order)``."""
        frames = mel.frames if isinstance(mel, MelSpectrogram) else np.asarray(mel)
        coeffs = np.zeros((frames.shape[0], self.n_bands, self.order))
        for t, frame in enumerate(frames):
            power = self.linear_power(frame)
            for b in range(self.n_bands):
                r = self.band_autocorrelation(power[self.band_bins[b]], b)
                coeffs[t, b] = levinson_durbin(r, self.order)
        return coeffs


def write_features(path, mel: MelSpectrogram) -> Path:
    """Raw little-endian float32, frame-major, plus a ``<path>.json`` header."""
    path = Path(path)
    mel.frames.astype("<f4").tofile(path)
    header = {"n_frames": mel.n_frames, "n_mels": mel.n_mels,
              "sample_rate": mel.sample_rate, "hop": mel.hop}
    header_path = path.with_name(path.name + ".json")
    header_path.write_text(json.dumps(header), encoding="utf-8")
    return header_path


def read_features(path) -> MelSpectrogram:
    path = Path(path)
    header_path = path.with_name(path.name + ".json")
    try:
        header = json.loads(header_path.read_text(encoding="utf-8"))
        data = np.fromfile(path, dtype="<f4")
    except (OSError, ValueError) as exc:
        raise FeatureError(f"cannot read features {path}: {exc}") from None
    n, m = header["n_frames"], header["n_mels"]
    if data.size != n * m:
        raise FeatureError(f"feature file holds {data.size} values, header says {n}x{m}")
    return MelSpectrogram(data.reshape(n, m).astype(np.float64),
                          int(header["sample_rate"]), int(header["hop"]))
