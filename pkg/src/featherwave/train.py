"""Desk-scale training loop with block-sparse pruning on a schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .checkpoint import Checkpoint
from .config import RunConfig
from .net import Adam, Batch, NetShape, NumericalError, full_mask, init_params, srn_forward, train_step
from .pipeline import Frontend, Utterance, prepare_utterance
from .sparsity import TsspSchedule, mask_sparsity, prune_to


def uniform_nll(q: int) -> float:
    return 2.0 * math.log(q)


@dataclass
class _Track:
    utt: Utterance
    sig: np.ndarray
    exc: np.ndarray
    pred: np.ndarray
    target: np.ndarray


class Dataset:
    """Teacher-forcing chunks drawn from prepared utterances.

    Each chunk carries a mel window wide enough that the condition stack's
    outputs for the chunk's frames are exact; window positions outside the
    utterance are flagged invalid and behave as zero padding.
    """

    def __init__(self, utterances: list[Utterance], fe: Frontend):
        self.fe = fe
        cfg = fe.cfg
        self.seq_len = cfg.seq_len
        self.repeat = cfg.repeat
        self.context = cfg.cond_layers
        self.window = (cfg.seq_len - 1) // cfg.repeat + 2 + 2 * self.context
        self.tracks = []
        for u in utterances:
            if u.n_steps < self.seq_len:
                continue
            self.tracks.append(_Track(u, *u.network_inputs(fe.codec)))
        if not self.tracks:
            raise ValueError("corpus has no utterance longer than one training chunk")
        lengths = np.array([t.utt.n_steps - self.seq_len + 1 for t in self.tracks], dtype=float)
        self.weights = lengths / lengths.sum()

    @classmethod
    def from_audio(cls, audio: list[np.ndarray], fe: Frontend) -> "Dataset":
        return cls([prepare_utterance(x, fe) for x in audio], fe)

    def _chunk(self, track: _Track, start: int):
        mel = track.utt.mel.frames
        n_frames = mel.shape[0]
        f0 = start // self.repeat
        ws = f0 - self.context
        pos = ws + np.arange(self.window)
        valid = (pos >= 0) & (pos < n_frames)
        win = np.zeros((self.window, mel.shape[1]))
        win[valid] = mel[pos[valid]]
        steps = start + np.arange(self.seq_len)
        fpos = steps // self.repeat - ws
        sl = slice(start, start + self.seq_len)
        return (win, valid.astype(np.float64), fpos, track.sig[sl], track.exc[sl],
                track.pred[sl], track.target[sl])

    def _stack(self, chunks) -> Batch:
        cols = list(zip(*chunks))
        return Batch(*(np.stack(c) for c in cols))

    def sample(self, rng: np.random.Generator, n_chunks: int) -> Batch:
        chunks = []
        for _ in range(n_chunks):
            ti = rng.choice(len(self.tracks), p=self.weights)
            tr = self.tracks[ti]
            start = int(rng.integers(0, tr.utt.n_steps - self.seq_len + 1))
            chunks.append(self._chunk(tr, start))
        return self._stack(chunks)

    def eval_batches(self, n_chunks: int = 64, per_batch: int = 16) -> list[Batch]:
        """Evenly spaced chunks over every utterance, deterministic."""
        chunks = []
        per_track = max(1, n_chunks // len(self.tracks))
        for tr in self.tracks:
            last = tr.utt.n_steps - self.seq_len
            for start in np.linspace(0, last, per_track).astype(int):
                chunks.append(self._chunk(tr, int(start)))
        return [self._stack(chunks[i:i + per_batch]) for i in range(0, len(chunks), per_batch)]


def evaluate_nll(params, shape: NetShape, batches: list[Batch]) -> float:
    total, count = 0.0, 0
    for b in batches:
        loss, _ = srn_forward(params, shape, b, need_cache=False)
        n = b.target.size
        total += loss * n
        count += n
    return total / count


@dataclass
class TrainResult:
    params: dict
    mask: np.ndarray
    history: list = field(default_factory=list)  # (iter, loss, target_sparsity, achieved)
    final_nll: float = float("nan")
    mask_log: list = field(default_factory=list)


def train(dataset: Dataset, cfg: RunConfig, schedule: Callable[[int], float] | None = None,
          iterations: int | None = None, seed: int | None = None,
          log: Callable[[str], None] | None = None, eval_batches=None,
          track_masks: bool = False) -> TrainResult:
    """Adam on teacher-forced chunks; recurrent block masks follow ``schedule(iter)``.

    Masks are recomputed only when the scheduled sparsity rises, and pruning
    is monotone, so they stay frozen through maintain phases.
    """
    shape = NetShape.from_config(cfg)
    seed = cfg.seed if seed is None else seed
    iterations = cfg.train_iterations if iterations is None else iterations
    if schedule is None:
        schedule = TsspSchedule.from_config(cfg)
    params = init_params(shape, seed)
    opt = Adam(params, cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    rng = np.random.default_rng(seed + 1)
    mask = full_mask(shape)
    H = shape.gru_units
    current = 0.0
    result = TrainResult(params, mask)
    if log is not None:
        log("iter,nll,target_sparsity,achieved_sparsity")
    for it in range(iterations):
        target = schedule(it)
        if target > current:
            w = params["gru.w_hh"].reshape(3, H, H)
            mask = prune_to(w, target, mask, shape.block_rows)
            current = target
            if track_masks:
                result.mask_log.append((it, mask.copy()))
        batch = dataset.sample(rng, cfg.chunks_per_batch)
        loss = train_step(params, shape, batch, opt, None if current == 0.0 else mask)
        if not math.isfinite(loss):
            raise NumericalError(f"non-finite loss at iteration {it}")
        achieved = mask_sparsity(mask)
        result.history.append((it, loss, target, achieved))
        if log is not None and (it % cfg.log_every == 0 or it == iterations - 1):
            log(f"{it},{loss:.6f},{target:.6f},{achieved:.6f}")
    result.mask = mask
    if eval_batches is not None:
        result.final_nll = evaluate_nll(params, shape, eval_batches)
    return result


def to_checkpoint(result: TrainResult, cfg: RunConfig) -> Checkpoint:
    return Checkpoint(cfg, result.params, {"gru.w_hh": result.mask.astype(np.uint8)})
