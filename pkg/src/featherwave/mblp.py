"""Multi-band linear prediction closed loop.

Prediction uses the quantisation-reconstructed history on both sides
(target preparation and synthesis), so training inputs match what the
generator will see.  Coefficients switch at frame boundaries; each frame
covers ``repeat`` steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .codec import MuLawCodec


class MblpError(ValueError):
    pass


class LpState:
    """Last ``order`` reconstructed samples per band, newest first."""

    def __init__(self, n_bands: int, order: int):
        self.hist = np.zeros((n_bands, order))

    @property
    def n_bands(self) -> int:
        return self.hist.shape[0]

    @property
    def order(self) -> int:
        return self.hist.shape[1]

    def copy(self) -> "LpState":
        s = LpState(self.n_bands, self.order)
        s.hist[:] = self.hist
        return s


@dataclass
class ExcitationFrame:
    e_idx: np.ndarray  # (bands, steps) int64
    pred: np.ndarray  # (bands, steps)
    recon: np.ndarray  # (bands, steps)

    @property
    def n_steps(self) -> int:
        return self.e_idx.shape[1]


def predict(state: LpState, band: int, alpha) -> float:
    alpha = np.ascontiguousarray(alpha, dtype=np.float64)
    hist = state.hist[band:band + 1]
    return float(kernels.lp_predict(hist, alpha[None, :])[0])


def predict_all(state: LpState, coeffs) -> np.ndarray:
    """Prediction for every band at once; ``coeffs`` is ``(bands, order)``."""
    return kernels.lp_predict(state.hist, np.ascontiguousarray(coeffs, dtype=np.float64))


def _check_plan(coeffs, n_steps, repeat, n_bands):
    coeffs = np.ascontiguousarray(coeffs, dtype=np.float64)
    if coeffs.ndim != 3 or coeffs.shape[1] != n_bands:
        raise MblpError(f"plan shape {coeffs.shape} does not match {n_bands} bands")
    if coeffs.shape[0] * repeat < n_steps:
        raise MblpError(
            f"plan covers {coeffs.shape[0] * repeat} steps, signal has {n_steps}")
    return coeffs


def prepare_targets(g, coeffs, codec: MuLawCodec, repeat: int,
                    state: LpState | None = None) -> ExcitationFrame:
    """Quantised excitation, prediction and reconstruction for every step and band."""
    g = np.ascontiguousarray(g, dtype=np.float64)
    coeffs = _check_plan(coeffs, g.shape[1], repeat, g.shape[0])
    if state is None:
        state = LpState(g.shape[0], coeffs.shape[2])
    e_idx, pred, recon = kernels.lp_prepare(
        g, coeffs, repeat, codec.decode_table, float(codec.mu), state.hist)
    return ExcitationFrame(e_idx, pred, recon)


def reconstruct(e_idx, coeffs, codec: MuLawCodec, repeat: int,
                state: LpState | None = None) -> np.ndarray:
    """Replay excitation indices through the predictor; inverse of :func:`prepare_targets`."""
    e_idx = np.ascontiguousarray(e_idx, dtype=np.int64)
    coeffs = _check_plan(coeffs, e_idx.shape[1], repeat, e_idx.shape[0])
    if state is None:
        state = LpState(e_idx.shape[0], coeffs.shape[2])
    try:
        return kernels.lp_replay(e_idx, coeffs, repeat, codec.decode_table, state.hist)
    except IndexError as exc:
        raise MblpError(str(exc)) from None


def reconstruct_step(state: LpState, coeffs, e_idx, codec: MuLawCodec) -> np.ndarray:
    """One step for all bands: ``g = prediction + decode(e_idx)``; pushes ``g`` into history."""
    e_idx = np.asarray(e_idx)
    if e_idx.min() < 0 or e_idx.max() >= codec.levels:
        raise MblpError("excitation index out of range")
    g = predict_all(state, coeffs) + codec.decode_table[e_idx]
    kernels.lp_push(state.hist, g)
    return g
