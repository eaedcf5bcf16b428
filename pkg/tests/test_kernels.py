import os
import subprocess
import sys

import numpy as np
import pytest

from featherwave import corpus, kernels
from featherwave.codec import MuLawCodec
from featherwave.config import RunConfig
from featherwave.pipeline import Frontend, prepare_utterance

pytestmark = pytest.mark.skipif(kernels.compiled is None, reason="compiled extension not built")

C, P = kernels.compiled, kernels.fallback
codec = MuLawCodec(10)


@pytest.fixture(scope="module")
def utt():
    return prepare_utterance(corpus.vowel(1.0), Frontend(RunConfig()))


def test_prepare_bit_identical(utt):
    out = []
    for mod in (C, P):
        hist = np.zeros((4, 8))
        out.append(mod.lp_prepare(utt.subbands, utt.plan, 75, codec.decode_table,
                                  float(codec.mu), hist) + (hist,))
    for a, b in zip(*out):
        assert np.array_equal(a, b)


def test_replay_bit_identical(utt):
    a = C.lp_replay(utt.targets.e_idx, utt.plan, 75, codec.decode_table, np.zeros((4, 8)))
    b = P.lp_replay(utt.targets.e_idx, utt.plan, 75, codec.decode_table, np.zeros((4, 8)))
    assert np.array_equal(a, b)
    assert np.array_equal(a, utt.targets.recon)


def test_replay_rejects_bad_index(utt):
    e = utt.targets.e_idx.copy()
    e[2, 10] = 1024
    for mod in (C, P):
        with pytest.raises(IndexError):
            mod.lp_replay(e, utt.plan, 75, codec.decode_table, np.zeros((4, 8)))


def test_predict_and_push():
    rng = np.random.default_rng(0)
    h1 = rng.standard_normal((4, 8))
    h2 = h1.copy()
    a = rng.standard_normal((4, 8))
    assert np.array_equal(C.lp_predict(h1, a), P.lp_predict(h2, a))
    v = rng.standard_normal(4)
    C.lp_push(h1, v)
    P.lp_push(h2, v)
    assert np.array_equal(h1, h2)
    np.testing.assert_array_equal(h1[:, 0], v)


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_bsr_bit_identical(dtype):
    from featherwave.sparsity import BlockSparseMatrix, expand_mask, random_block_mask
    rng = np.random.default_rng(1)
    for R in (16, 4):
        mask = random_block_mask(rng, 96 // R, 96, 0.3)
        dense = (rng.standard_normal((96, 96)) * expand_mask(mask, R)).astype(dtype)
        m = BlockSparseMatrix.from_dense(dense, mask, R)
        x = rng.standard_normal(96).astype(dtype)
        assert np.array_equal(m.matvec(x, backend="cython"), m.matvec(x, backend="python"))


def test_env_forces_fallback():
    env = dict(os.environ, FEATHERWAVE_BACKEND="python")
    res = subprocess.run([sys.executable, "-c", "import featherwave; print(featherwave.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    assert res.stdout.strip() == "python"


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")
