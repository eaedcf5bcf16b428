"""Compiled vs pure-Python kernels: block-sparse matvec and the MB-LP recursion.

Usage: python benchmarks/bench_kernels.py [--reps N] [--seconds S]
"""

import argparse
import time

import numpy as np

from featherwave import corpus, kernels
from featherwave.codec import MuLawCodec
from featherwave.config import RunConfig
from featherwave.pipeline import Frontend, prepare_utterance
from featherwave.sparsity import BlockSparseMatrix, expand_mask, random_block_mask


def timed(fn, reps):
    fn()
    t0 = time.perf_counter()
    for _ in range(reps):
        fn()
    return (time.perf_counter() - t0) / reps


def bench_matvec(mod, reps, density):
    rng = np.random.default_rng(0)
    mask = random_block_mask(rng, 24, 384, density)
    dense = (rng.standard_normal((384, 384)) * expand_mask(mask)).astype(np.float32)
    m = BlockSparseMatrix.from_dense(dense, mask)
    x = rng.standard_normal(384).astype(np.float32)
    out = np.empty(384, dtype=np.float32)
    t = timed(lambda: mod.bsr_matvec(m.row_ptr, m.col_idx, m.values, x, out, 1), reps)
    return t, float(out.sum())


def bench_prepare(mod, utt, codec, reps):
    res = {}

    def run():
        res["out"] = mod.lp_prepare(utt.subbands, utt.plan, 75, codec.decode_table,
                                    float(codec.mu), np.zeros((4, 8)))
    t = timed(run, reps)
    return t, float(res["out"][2].sum())


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=200)
    ap.add_argument("--seconds", type=float, default=1.0)
    args = ap.parse_args()

    if kernels.compiled is None:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")
    backends = [("cython", kernels.compiled), ("python", kernels.fallback)]
    codec = MuLawCodec(10)
    utt = prepare_utterance(corpus.two_tone(args.seconds), Frontend(RunConfig()))

    print("kernel,backend,us_per_call,speedup_vs_python,checksum")
    for density in (0.1, 1.0):
        rows = [(name, *bench_matvec(mod, args.reps, density)) for name, mod in backends]
        base = rows[1][1]
        for name, t, chk in rows:
            print(f"bsr_matvec_384_d{density},{name},{t * 1e6:.2f},{base / t:.1f},{chk:.6e}")
    reps = max(1, args.reps // 100)
    rows = [(name, *bench_prepare(mod, utt, codec, reps)) for name, mod in backends]
    base = rows[1][1]
    for name, t, chk in rows:
        print(f"lp_prepare_{args.seconds:g}s,{name},{t * 1e6:.0f},{base / t:.1f},{chk:.6e}")
    assert rows[0][2] == rows[1][2], "backends disagree"


if __name__ == "__main__":
    main()
