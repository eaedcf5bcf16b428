"""Autoregressive generation with fine-distribution subtraction."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .codec import MuLawCodec, de_emphasis
from .filterbank import FilterBank
from .net import InferenceNet, NumericalError, softmax

MASK64 = (1 << 64) - 1


class SplitMix64:
    """SplitMix64 (Steele, Lea, Flood 2014): 64-bit state, add-shift-multiply mix.

    ``state += 0x9E3779B97F4A7C15``; output is the state pushed through
    ``z ^= z >> 30; z *= 0xBF58476D1CE4E5B9; z ^= z >> 27; z *= 0x94D049BB133111EB;
    z ^= z >> 31``.  Uniform floats take the top 53 bits.
    """

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))


def subtract_and_renormalize(p, threshold: float) -> np.ndarray:
    """``max(p - T, 0)`` renormalised; returns ``p`` unchanged if nothing survives."""
    p = np.asarray(p, dtype=np.float64)
    q = np.maximum(p - threshold, 0.0)
    total = q.sum()
    if total <= 0.0:
        return p
    return q / total


def sample_categorical(p, rng: SplitMix64) -> int:
    """Inverse-CDF draw with a sequential cumulative sum."""
    u = rng.uniform()
    acc = 0.0
    last = 0
    for i, pi in enumerate(np.asarray(p, dtype=np.float64).tolist()):
        if pi <= 0.0:
            continue
        acc += pi
        last = i
        if u < acc:
            return i
    return last


@dataclass(frozen=True)
class SamplerConfig:
    threshold: float = 0.02
    seed: int = 0
    fallback_unsubtracted: bool = True


def _trim_merge(G, fb: FilterBank, alpha: float) -> np.ndarray:
    y = de_emphasis(fb.synthesize(G), alpha)
    return np.clip(y[fb.group_delay:], -1.0, 1.0)


def generate(net: InferenceNet | None, mel, plan, codec: MuLawCodec, fb: FilterBank,
             repeat: int, alpha: float, cfg: SamplerConfig = SamplerConfig(),
             forced_excitation=None, hook=None) -> np.ndarray:
    """Run the sample-rate loop over every frame and return fullband audio.

    ``forced_excitation`` (bands, steps) bypasses the network and replays the
    given excitation indices through the same MB-LP arithmetic.
    ``hook(step, coarse_probs, fine_raw, fine_used)`` observes the distributions.
    Output length is ``n_frames * repeat * bands - group_delay``.
    """
    plan = np.ascontiguousarray(plan, dtype=np.float64)
    n_frames = plan.shape[0]
    nb, order = plan.shape[1], plan.shape[2]
    n_steps = n_frames * repeat
    q = codec.q_root
    table = codec.decode_table
    hist = np.zeros((nb, order))
    G = np.empty((nb, n_steps))
    rng = SplitMix64(cfg.seed)

    if forced_excitation is not None:
        forced_excitation = np.asarray(forced_excitation, dtype=np.int64)
        if forced_excitation.shape != (nb, n_steps):
            raise ValueError(f"forced excitation shape {forced_excitation.shape} != {(nb, n_steps)}")
        G[:] = kernels.lp_replay(np.ascontiguousarray(forced_excitation), plan, repeat, table, hist)
        return _trim_merge(G, fb, alpha)

    cond = net.condition(mel)
    if cond.shape[0] != n_frames:
        raise ValueError(f"mel has {cond.shape[0]} frames, plan has {n_frames}")
    h = net.zero_state()
    sig = np.full(nb, codec.zero_index)
    exc = np.full(nb, codec.zero_index)
    cond_proj = None
    for n in range(n_steps):
        frame = n // repeat
        if n % repeat == 0:
            cond_proj = net.cond_projection(cond[frame])
        p = kernels.lp_predict(hist, plan[frame])
        pred = codec.encode(p)
        coarse_logits, h, a = net.coarse_step(h, sig, exc, pred, cond_proj)
        if not np.all(np.isfinite(coarse_logits)):
            raise NumericalError(f"non-finite coarse logits at step {n}")
        pc = softmax(coarse_logits.astype(np.float64))
        c_idx = np.array([sample_categorical(pc[b], rng) for b in range(nb)])
        fine_logits = net.fine_logits(a, c_idx)
        if not np.all(np.isfinite(fine_logits)):
            raise NumericalError(f"non-finite fine logits at step {n}")
        pf = softmax(fine_logits.astype(np.float64))
        pf_used = np.stack([subtract_and_renormalize(pf[b], cfg.threshold) for b in range(nb)])
        f_idx = np.array([sample_categorical(pf_used[b], rng) for b in range(nb)])
        if hook is not None:
            hook(n, pc, pf, pf_used)
        e = c_idx * q + f_idx
        g = p + table[e]
        kernels.lp_push(hist, g)
        G[:, n] = g
        sig = codec.encode(g)
        exc = e
    return _trim_merge(G, fb, alpha)


def snr_db(reference, estimate) -> float:
    reference = np.asarray(reference, dtype=np.float64)
    err = reference - np.asarray(estimate, dtype=np.float64)
    num = float(np.sum(reference ** 2))
    den = float(np.sum(err ** 2))
    if den == 0.0:
        return math.inf
    if num == 0.0:
        return -math.inf
    return 10.0 * math.log10(num / den)
