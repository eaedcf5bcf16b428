"""Block-sparse pruning of recurrent weights, the two-stage schedule, and a BSR matvec."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import kernels


class SparsityError(ValueError):
    pass


def _cubic(s0: float, s1: float, t: float, span: float) -> float:
    return s0 + (s1 - s0) * (1.0 - (1.0 - t / span) ** 3)


@dataclass(frozen=True)
class TsspSchedule:
    """Warm-up ramp to ``warmup_target``, hold, then ``n_loops`` of (ramp +increment, hold).

    Ramps are cubic and front-loaded.  Sparsity levels are computed as
    ``warmup_target + i * loop_increment`` (not accumulated) so milestones are exact.
    """

    warmup_target: float = 0.5
    warmup_ramp_iters: int = 300_000
    warmup_maintain_iters: int = 100_000
    loop_increment: float = 0.1
    loop_ramp_iters: int = 100_000
    loop_maintain_iters: int = 100_000
    n_loops: int = 4

    @classmethod
    def from_config(cls, cfg, scaled: bool = True) -> "TsspSchedule":
        div = cfg.schedule_scale if scaled else 1
        return cls(cfg.warmup_target, cfg.warmup_ramp_iters // div,
                   cfg.warmup_maintain_iters // div, cfg.loop_increment,
                   cfg.loop_ramp_iters // div, cfg.loop_maintain_iters // div, cfg.n_loops)

    @property
    def final_target(self) -> float:
        return self.warmup_target + self.n_loops * self.loop_increment

    @property
    def total_iters(self) -> int:
        return (self.warmup_ramp_iters + self.warmup_maintain_iters
                + self.n_loops * (self.loop_ramp_iters + self.loop_maintain_iters))

    def __call__(self, it: int) -> float:
        return target_sparsity(it, self)

    def milestones(self) -> list[int]:
        """Iteration at the start of every segment, plus the end of the schedule."""
        marks = [0, self.warmup_ramp_iters]
        pos = self.warmup_ramp_iters + self.warmup_maintain_iters
        for _ in range(self.n_loops):
            marks += [pos, pos + self.loop_ramp_iters]
            pos += self.loop_ramp_iters + self.loop_maintain_iters
        marks.append(pos)
        return marks


def target_sparsity(it: int, sched: TsspSchedule) -> float:
    if it < 0:
        raise SparsityError("iteration must be non-negative")
    if it < sched.warmup_ramp_iters:
        return _cubic(0.0, sched.warmup_target, it, sched.warmup_ramp_iters)
    pos = sched.warmup_ramp_iters + sched.warmup_maintain_iters
    if it < pos:
        return sched.warmup_target
    for i in range(sched.n_loops):
        lo = sched.warmup_target + i * sched.loop_increment
        hi = sched.warmup_target + (i + 1) * sched.loop_increment
        if it < pos + sched.loop_ramp_iters:
            return _cubic(lo, hi, it - pos, sched.loop_ramp_iters)
        pos += sched.loop_ramp_iters
        if it < pos + sched.loop_maintain_iters:
            return hi
        pos += sched.loop_maintain_iters
    return sched.final_target


@dataclass(frozen=True)
class OneShotSchedule:
    """Dense until ``at_iter``, then ``target`` sparsity in a single pruning step."""

    at_iter: int
    target: float = 0.9

    def __call__(self, it: int) -> float:
        return self.target if it >= self.at_iter else 0.0


def block_saliency(weight: np.ndarray, block_rows: int = 16) -> np.ndarray:
    """Mean absolute value per ``block_rows x 1`` block, shape ``(rows // block_rows, cols)``."""
    rows, cols = weight.shape
    if rows % block_rows:
        raise SparsityError(f"{rows} rows not divisible by block height {block_rows}")
    return np.abs(weight).reshape(rows // block_rows, block_rows, cols).mean(axis=1)


def prune_to(weights, sparsity: float, prev_mask: np.ndarray | None = None,
             block_rows: int = 16) -> np.ndarray:
    """Block masks (1 = kept) for a stack of matrices ``(n_mats, rows, cols)``.

    Each matrix loses its ``round(sparsity * n_blocks)`` lowest-saliency blocks.
    Blocks already pruned in ``prev_mask`` stay pruned.
    """
    if not 0.0 <= sparsity < 1.0:
        raise SparsityError(f"sparsity must lie in [0, 1), got {sparsity}")
    weights = np.asarray(weights)
    squeeze = weights.ndim == 2
    if squeeze:
        weights = weights[None]
        if prev_mask is not None:
            prev_mask = np.asarray(prev_mask)[None]
    masks = []
    for m, w in enumerate(weights):
        sal = block_saliency(w, block_rows)
        n_blocks = sal.size
        n_prune = int(round(sparsity * n_blocks))
        flat = sal.ravel().astype(np.float64)
        if prev_mask is not None:
            dead = prev_mask[m].ravel() == 0
            flat = np.where(dead, -np.inf, flat)
            n_prune = max(n_prune, int(dead.sum()))
        order = np.argsort(flat, kind="stable")
        mask = np.ones(n_blocks, dtype=np.uint8)
        mask[order[:n_prune]] = 0
        masks.append(mask.reshape(sal.shape))
    out = np.stack(masks)
    return out[0] if squeeze else out


def expand_mask(mask: np.ndarray, block_rows: int = 16) -> np.ndarray:
    """Block mask -> elementwise mask (repeats along rows)."""
    return np.repeat(mask, block_rows, axis=-2)


def mask_sparsity(mask: np.ndarray) -> float:
    return 1.0 - float(np.count_nonzero(mask)) / mask.size


class BlockSparseMatrix:
    """Block-row compressed storage of ``block_rows x 1`` column blocks.

    Blocks within a block row are stored in ascending column order.
    """

    def __init__(self, row_ptr, col_idx, values, shape):
        self.row_ptr = np.ascontiguousarray(row_ptr, dtype=np.int64)
        self.col_idx = np.ascontiguousarray(col_idx, dtype=np.int64)
        self.values = np.ascontiguousarray(values)
        self.shape = tuple(shape)
        self.block_rows = self.values.shape[1]

    @classmethod
    def from_dense(cls, dense: np.ndarray, mask: np.ndarray | None = None,
                   block_rows: int = 16, dtype=None) -> "BlockSparseMatrix":
        dense = np.asarray(dense)
        dtype = dense.dtype if dtype is None else np.dtype(dtype)
        rows, cols = dense.shape
        if rows % block_rows:
            raise SparsityError(f"{rows} rows not divisible by block height {block_rows}")
        n_brows = rows // block_rows
        if mask is None:
            mask = np.ones((n_brows, cols), dtype=np.uint8)
        if mask.shape != (n_brows, cols):
            raise SparsityError(f"mask shape {mask.shape} != {(n_brows, cols)}")
        br, col = np.nonzero(mask)
        blocks = dense.reshape(n_brows, block_rows, cols)
        values = blocks[br, :, col].astype(dtype)
        row_ptr = np.zeros(n_brows + 1, dtype=np.int64)
        np.cumsum(np.bincount(br, minlength=n_brows), out=row_ptr[1:])
        return cls(row_ptr, col, values.reshape(-1, block_rows), (rows, cols))

    @property
    def nnz_blocks(self) -> int:
        return len(self.col_idx)

    @property
    def density(self) -> float:
        n_blocks = self.shape[0] // self.block_rows * self.shape[1]
        return self.nnz_blocks / n_blocks

    def to_dense(self) -> np.ndarray:
        n_brows = self.shape[0] // self.block_rows
        out = np.zeros((n_brows, self.block_rows, self.shape[1]), dtype=self.values.dtype)
        br = np.repeat(np.arange(n_brows), np.diff(self.row_ptr))
        out[br, :, self.col_idx] = self.values
        return out.reshape(self.shape)

    def matvec(self, x, out=None, threads: int = 1, backend=None) -> np.ndarray:
        return sparse_matvec(self, x, out=out, threads=threads, backend=backend)


def sparse_matvec(m: BlockSparseMatrix, x, out=None, threads: int = 1, backend=None):
    x = np.ascontiguousarray(x, dtype=m.values.dtype)
    if x.shape != (m.shape[1],):
        raise SparsityError(f"vector of length {x.shape} does not match {m.shape}")
    if out is None:
        out = np.empty(m.shape[0], dtype=m.values.dtype)
    mod = kernels.get_backend(backend)
    if m.values.shape[0] == 0:
        out[:] = 0
        return out
    mod.bsr_matvec(m.row_ptr, m.col_idx, m.values, x, out, threads)
    return out


def random_block_mask(rng, n_brows: int, cols: int, density: float) -> np.ndarray:
    n_blocks = n_brows * cols
    keep = int(round(density * n_blocks))
    mask = np.zeros(n_blocks, dtype=np.uint8)
    mask[rng.permutation(n_blocks)[:keep]] = 1
    return mask.reshape(n_brows, cols)


def bench_kernel(n: int = 384, density: float = 0.1, reps: int = 2000,
                 block_rows: int = 16, backend=None, threads: int = 1, seed: int = 0,
                 dtype=np.float32) -> dict:
    """Time sparse vs dense matvec on an ``n x n`` matrix; ns per call for each."""
    rng = np.random.default_rng(seed)
    dense = rng.standard_normal((n, n)).astype(dtype)
    mask = random_block_mask(rng, n // block_rows, n, density)
    dense *= expand_mask(mask, block_rows)
    sp = BlockSparseMatrix.from_dense(dense, mask, block_rows)
    x = rng.standard_normal(n).astype(dtype)
    out = np.empty(n, dtype=dtype)
    mod = kernels.get_backend(backend)
    checksum = 0.0

    t0 = time.perf_counter()
    for _ in range(reps):
        mod.bsr_matvec(sp.row_ptr, sp.col_idx, sp.values, x, out, threads)
    t_sparse = time.perf_counter() - t0
    checksum += float(out.sum())

    t0 = time.perf_counter()
    for _ in range(reps):
        np.dot(dense, x, out=out)
    t_dense = time.perf_counter() - t0
    checksum += float(out.sum())

    return {
        "n": n, "density": density, "reps": reps,
        "backend": "python" if mod is kernels.fallback else "cython",
        "sparse_ns": t_sparse / reps * 1e9, "dense_ns": t_dense / reps * 1e9,
        "sparse_s": t_sparse, "dense_s": t_dense,
        "speedup": t_dense / t_sparse if t_sparse > 0 else float("inf"),
        "checksum": checksum,
    }
