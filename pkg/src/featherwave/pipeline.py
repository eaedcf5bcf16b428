"""Wiring of the non-neural stages: features, MB-LP targets, copy-synthesis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codec import MuLawCodec, pre_emphasis
from .config import RunConfig
from .features import MelLpc, MelSpectrogram, melspectrogram
from .filterbank import FilterBank
from .mblp import ExcitationFrame, prepare_targets
from .sampler import generate, snr_db


class Frontend:
    """Shared immutable state for one configuration."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.fb = FilterBank.from_config(cfg)
        self.codec = MuLawCodec(cfg.bits)
        self.lpc = MelLpc(cfg)

    def pad(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        rem = len(x) % self.cfg.hop
        if rem:
            x = np.concatenate([x, np.zeros(self.cfg.hop - rem)])
        return x

    def mel(self, x) -> MelSpectrogram:
        return melspectrogram(self.pad(x), self.cfg)

    def subbands(self, x) -> np.ndarray:
        return self.fb.analyze(pre_emphasis(self.pad(x), self.cfg.preemph))


@dataclass
class Utterance:
    audio: np.ndarray  # padded to a multiple of hop
    mel: MelSpectrogram
    plan: np.ndarray  # (frames, bands, order)
    subbands: np.ndarray  # (bands, steps)
    targets: ExcitationFrame

    @property
    def n_steps(self) -> int:
        return self.subbands.shape[1]

    def network_inputs(self, codec: MuLawCodec):
        """Per-step (sig, exc, pred, target) index arrays, each ``(steps, bands)``."""
        t = self.targets
        nb, S = t.e_idx.shape
        sig = np.empty((S, nb), dtype=np.int64)
        exc = np.empty((S, nb), dtype=np.int64)
        sig[0] = codec.zero_index
        exc[0] = codec.zero_index
        sig[1:] = codec.encode(t.recon[:, :-1]).T
        exc[1:] = t.e_idx[:, :-1].T
        pred = codec.encode(t.pred).T
        return sig, exc, np.ascontiguousarray(pred), np.ascontiguousarray(t.e_idx.T)


def prepare_utterance(x, fe: Frontend) -> Utterance:
    audio = fe.pad(x)
    mel = melspectrogram(audio, fe.cfg)
    plan = fe.lpc.plan(mel)
    g = fe.fb.analyze(pre_emphasis(audio, fe.cfg.preemph))
    targets = prepare_targets(g, plan, fe.codec, fe.cfg.repeat)
    return Utterance(audio, mel, plan, g, targets)


def copy_synthesis(x, fe: Frontend) -> tuple[np.ndarray, float]:
    """Rebuild audio from ground-truth excitations; returns (audio, SNR dB vs input)."""
    utt = prepare_utterance(x, fe)
    y = generate(None, utt.mel.frames, utt.plan, fe.codec, fe.fb, fe.cfg.repeat,
                 fe.cfg.preemph, forced_excitation=utt.targets.e_idx)
    ref = utt.audio[: len(y)]
    return y, snr_db(ref, y)
