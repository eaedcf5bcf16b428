import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from featherwave import kernels
from featherwave.config import RunConfig
from featherwave.sparsity import (BlockSparseMatrix, OneShotSchedule, SparsityError,
                                  TsspSchedule, bench_kernel, block_saliency, expand_mask,
                                  mask_sparsity, prune_to, random_block_mask, sparse_matvec,
                                  target_sparsity)

FULL = TsspSchedule()


def dense_oracle(dense, x):
    """Row-by-row sequential sums in float64, independent of numpy's BLAS."""
    out = []
    for row in dense.tolist():
        acc = 0.0
        for a, b in zip(row, x.tolist()):
            acc += a * b
        out.append(acc)
    return np.array(out)


class TestSchedule:
    @pytest.mark.parametrize("it,expected", [(0, 0.0), (300_000, 0.5), (400_000, 0.5),
                                             (1_200_000, 0.9), (5_000_000, 0.9)])
    def test_published_milestones(self, it, expected):
        assert target_sparsity(it, FULL) == expected

    def test_midpoint_of_first_loop_ramp(self):
        assert target_sparsity(450_000, FULL) == pytest.approx(0.5875, abs=1e-15)

    def test_loop_holds_exact(self):
        for i, level in enumerate([0.6, 0.7, 0.8, 0.9]):
            start = 500_000 + i * 200_000
            assert target_sparsity(start, FULL) == level
            assert target_sparsity(start + 99_999, FULL) == level

    def test_final_and_total(self):
        assert FULL.final_target == 0.9
        assert FULL.total_iters == 1_200_000
        assert FULL.milestones()[-1] == 1_200_000

    def test_monotone_full_sweep(self):
        vals = [target_sparsity(i, FULL) for i in range(0, 1_300_000, 250)]
        assert all(b >= a for a, b in zip(vals, vals[1:]))

    def test_continuous_at_boundaries(self):
        for m in FULL.milestones()[1:]:
            assert abs(target_sparsity(m, FULL) - target_sparsity(m - 1, FULL)) < 1e-4

    def test_scaled_config(self):
        s = TsspSchedule.from_config(RunConfig())
        assert (s.warmup_ramp_iters, s.loop_ramp_iters, s.total_iters) == (300, 100, 1200)
        assert s(300) == 0.5 and s(1200) == 0.9

    def test_negative_iteration(self):
        with pytest.raises(SparsityError):
            target_sparsity(-1, FULL)

    def test_one_shot(self):
        s = OneShotSchedule(300)
        assert s(299) == 0.0 and s(300) == 0.9

    @given(st.integers(0, 2_000_000), st.integers(0, 2_000_000))
    def test_monotone_property(self, a, b):
        lo, hi = sorted((a, b))
        assert target_sparsity(lo, FULL) <= target_sparsity(hi, FULL)


class TestPrune:
    def test_zero_sparsity_all_ones(self):
        w = np.random.default_rng(0).standard_normal((3, 32, 32))
        assert prune_to(w, 0.0).all()

    def test_toy_blocks(self):
        # 8x2 matrix, 4x1 blocks: block means 1, 4, 2, 3
        w = np.zeros((8, 2))
        w[:4, 0] = 1.0
        w[4:, 0] = [-4, 4, 4, -4]
        w[:4, 1] = [2, -2, 2, -2]
        w[4:, 1] = 3.0
        np.testing.assert_array_equal(block_saliency(w, 4), [[1, 2], [4, 3]])
        np.testing.assert_array_equal(prune_to(w, 0.5, block_rows=4), [[0, 0], [1, 1]])

    def test_fraction_within_one_block(self):
        rng = np.random.default_rng(1)
        w = rng.standard_normal((3, 64, 64))
        n_blocks = 4 * 64
        for s in np.linspace(0, 0.95, 20):
            m = prune_to(w, float(s))
            for k in range(3):
                assert abs(mask_sparsity(m[k]) - s) <= 1.0 / n_blocks

    def test_monotone_no_regrowth(self):
        rng = np.random.default_rng(2)
        w = rng.standard_normal((3, 32, 48))
        prev = None
        for s in [0.1, 0.3, 0.3, 0.5, 0.7, 0.9]:
            # perturb weights so saliency ranking changes between rounds
            w = w + rng.standard_normal(w.shape)
            m = prune_to(w, s, prev)
            if prev is not None:
                assert np.all(m <= prev)
            prev = m

    def test_invalid(self):
        with pytest.raises(SparsityError):
            prune_to(np.zeros((16, 4)), 1.0)
        with pytest.raises(SparsityError):
            prune_to(np.zeros((15, 4)), 0.5)

    def test_expand(self):
        m = np.array([[1, 0]], dtype=np.uint8)
        np.testing.assert_array_equal(expand_mask(m, 3), [[1, 0]] * 3)


class TestBsr:
    def test_round_trip_exact(self):
        rng = np.random.default_rng(0)
        for density in (0.0, 0.05, 0.5, 1.0):
            mask = random_block_mask(rng, 24, 384, density)
            dense = rng.standard_normal((384, 384)) * expand_mask(mask)
            m = BlockSparseMatrix.from_dense(dense, mask)
            assert np.array_equal(m.to_dense(), dense)
            assert m.density == pytest.approx(density, abs=1 / (24 * 384))
            for r in range(24):
                cols = m.col_idx[m.row_ptr[r]:m.row_ptr[r + 1]]
                assert np.all(np.diff(cols) > 0)

    @pytest.mark.parametrize("backend", ["cython", "python"])
    def test_matches_sequential_oracle_64bit(self, backend):
        if backend == "cython" and kernels.compiled is None:
            pytest.skip("compiled extension not built")
        rng = np.random.default_rng(1)
        mask = random_block_mask(rng, 24, 384, 0.1)
        dense = rng.standard_normal((384, 384)) * expand_mask(mask)
        x = rng.standard_normal(384)
        y = sparse_matvec(BlockSparseMatrix.from_dense(dense, mask), x, backend=backend)
        np.testing.assert_allclose(y, dense_oracle(dense, x), rtol=1e-12, atol=1e-12)

    def test_float32_within_tolerance(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            mask = random_block_mask(rng, 24, 384, 0.1)
            dense = (rng.standard_normal((384, 384)) * expand_mask(mask)).astype(np.float32)
            x = rng.standard_normal(384).astype(np.float32)
            y = BlockSparseMatrix.from_dense(dense, mask).matvec(x)
            ref = dense.astype(np.float64) @ x.astype(np.float64)
            scale = np.abs(dense).astype(np.float64) @ np.abs(x).astype(np.float64)
            assert np.linalg.norm(y - ref) <= 1e-6 * np.linalg.norm(ref)
            # elementwise, relative to the magnitude of the summed terms
            assert np.all(np.abs(y - ref) <= 1e-6 * scale)

    def test_empty_mask(self):
        m = BlockSparseMatrix.from_dense(np.ones((32, 8)), np.zeros((2, 8), dtype=np.uint8))
        np.testing.assert_array_equal(m.matvec(np.ones(8)), np.zeros(32))

    def test_identity_pattern(self):
        eye = np.eye(32)
        mask = (block_saliency(eye) > 0).astype(np.uint8)
        x = np.arange(32, dtype=np.float64)
        np.testing.assert_array_equal(BlockSparseMatrix.from_dense(eye, mask).matvec(x), x)

    def test_dimension_mismatch(self):
        m = BlockSparseMatrix.from_dense(np.ones((16, 8)))
        with pytest.raises(SparsityError):
            m.matvec(np.ones(9))
        with pytest.raises(SparsityError):
            BlockSparseMatrix.from_dense(np.ones((16, 8)), np.ones((2, 8), dtype=np.uint8))

    def test_threads_bit_identical(self):
        rng = np.random.default_rng(3)
        mask = random_block_mask(rng, 24, 384, 0.1)
        dense = (rng.standard_normal((384, 384)) * expand_mask(mask)).astype(np.float32)
        m = BlockSparseMatrix.from_dense(dense, mask)
        x = rng.standard_normal(384).astype(np.float32)
        assert np.array_equal(m.matvec(x, threads=1), m.matvec(x, threads=4))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 6), st.integers(1, 40), st.floats(0, 1), st.integers(0, 2 ** 31))
    def test_property_exact_in_64bit(self, n_brows, cols, density, seed):
        rng = np.random.default_rng(seed)
        mask = random_block_mask(rng, n_brows, cols, density)
        dense = rng.standard_normal((16 * n_brows, cols)) * expand_mask(mask)
        x = rng.standard_normal(cols)
        y = BlockSparseMatrix.from_dense(dense, mask).matvec(x)
        np.testing.assert_array_equal(y, dense_oracle(dense, x))


class TestBench:
    def test_report_fields(self):
        r = bench_kernel(64, 0.5, reps=20)
        assert r["sparse_ns"] > 0 and r["dense_ns"] > 0
        assert np.isfinite(r["checksum"])

    def test_checksum_deterministic(self):
        assert bench_kernel(64, 0.3, 5, seed=7)["checksum"] == bench_kernel(64, 0.3, 5, seed=7)["checksum"]

    def test_full_density_sanity(self):
        if kernels.compiled is None:
            pytest.skip("compiled extension not built")
        r = bench_kernel(384, 1.0, reps=300)
        assert r["sparse_ns"] < 3 * r["dense_ns"]
