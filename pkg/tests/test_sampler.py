import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from featherwave import corpus
from featherwave.config import RunConfig
from featherwave.net import InferenceNet, NetShape, NumericalError, init_params
from featherwave.pipeline import Frontend, prepare_utterance
from featherwave.sampler import (SamplerConfig, SplitMix64, generate, sample_categorical,
                                 snr_db, subtract_and_renormalize)

CFG = RunConfig()


class TestSubtraction:
    def test_worked_example(self):
        out = subtract_and_renormalize([0.5, 0.3, 0.01, 0.19], 0.02)
        expected = np.array([0.48, 0.28, 0.0, 0.17]) / 0.93
        np.testing.assert_allclose(out, expected, atol=1e-9)
        np.testing.assert_allclose(out, [0.516129032, 0.301075269, 0.0, 0.182795699], atol=1e-9)

    def test_zero_threshold_identity(self):
        p = np.random.default_rng(0).dirichlet(np.ones(32))
        np.testing.assert_allclose(subtract_and_renormalize(p, 0.0), p, atol=1e-15)

    def test_one_hot_unchanged(self):
        p = np.zeros(8)
        p[3] = 1.0
        for t in (0.0, 0.02, 0.5, 0.99):
            np.testing.assert_array_equal(subtract_and_renormalize(p, t), p)

    def test_fallback_when_all_zeroed(self):
        p = np.full(4, 0.25)
        np.testing.assert_array_equal(subtract_and_renormalize(p, 0.3), p)

    def test_argmax_preserved_10k(self):
        rng = np.random.default_rng(1)
        checked = 0
        for _ in range(10_000):
            p = rng.dirichlet(np.full(32, rng.uniform(0.05, 2.0)))
            if p.max() > 0.02:
                assert np.argmax(subtract_and_renormalize(p, 0.02)) == np.argmax(p)
                checked += 1
        assert checked > 9000

    @settings(max_examples=200)
    @given(st.lists(st.floats(0.001, 1.0), min_size=2, max_size=40), st.floats(0, 0.03))
    def test_output_is_distribution(self, raw, t):
        p = np.array(raw) / sum(raw)
        q = subtract_and_renormalize(p, t)
        assert np.all(q >= 0) and abs(q.sum() - 1) < 1e-9
        # entries at or below the threshold vanish, unless the fallback kicked in
        assert np.all(q[p <= t] == 0) or np.all(p <= t)


class TestRng:
    def test_reference_stream(self):
        # first outputs for seed 0, computed by an independent transcription of the algorithm
        def ref(seed, n):
            out, s = [], seed
            for _ in range(n):
                s = (s + 0x9E3779B97F4A7C15) % 2 ** 64
                z = s
                z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) % 2 ** 64
                z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) % 2 ** 64
                out.append(z ^ (z >> 31))
            return out
        r = SplitMix64(0)
        assert [r.next_u64() for _ in range(5)] == ref(0, 5)
        assert ref(0, 1)[0] == 0xE220A8397B1DCDAF

    def test_uniform_range(self):
        r = SplitMix64(9)
        u = [r.uniform() for _ in range(10000)]
        assert min(u) >= 0.0 and max(u) < 1.0
        assert abs(np.mean(u) - 0.5) < 0.01


class TestCategorical:
    def test_one_hot(self):
        r = SplitMix64(1)
        p = np.zeros(10)
        p[7] = 1.0
        assert all(sample_categorical(p, r) == 7 for _ in range(500))

    def test_frequencies_within_three_sigma(self):
        p = np.array([0.05, 0.1, 0.2, 0.3, 0.25, 0.1])
        r = SplitMix64(2024)
        n = 100_000
        counts = np.bincount([sample_categorical(p, r) for _ in range(n)], minlength=len(p))
        sigma = np.sqrt(n * p * (1 - p))
        assert np.all(np.abs(counts - n * p) <= 3 * sigma)

    def test_never_draws_zero_probability(self):
        p = np.array([0.0, 0.5, 0.0, 0.5, 0.0])
        r = SplitMix64(3)
        assert {sample_categorical(p, r) for _ in range(2000)} == {1, 3}

    def test_deterministic(self):
        p = np.random.default_rng(0).dirichlet(np.ones(16))
        a, b = SplitMix64(77), SplitMix64(77)
        assert [sample_categorical(p, a) for _ in range(200)] == \
               [sample_categorical(p, b) for _ in range(200)]


@pytest.fixture(scope="module")
def tiny():
    fe = Frontend(CFG)
    u = prepare_utterance(corpus.vowel(0.1), fe)
    s = NetShape(80, 8, 2, 4, 32, 4, 16, 8, 16)
    params = init_params(s, 0)
    return fe, u, s, params


class TestGenerate:
    def test_output_length_and_range(self, tiny):
        fe, u, s, params = tiny
        y = generate(InferenceNet(params, s), u.mel.frames, u.plan, fe.codec, fe.fb,
                     CFG.repeat, CFG.preemph, SamplerConfig(seed=1))
        n_frames = u.plan.shape[0]
        assert len(y) == n_frames * CFG.repeat * 4 - fe.fb.group_delay
        assert np.all(np.isfinite(y)) and np.max(np.abs(y)) <= 1.0

    def test_deterministic_for_seed(self, tiny):
        fe, u, s, params = tiny
        run = lambda seed: generate(InferenceNet(params, s), u.mel.frames, u.plan, fe.codec,
                                    fe.fb, CFG.repeat, CFG.preemph, SamplerConfig(seed=seed))
        a, b, c = run(5), run(5), run(6)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_hook_sees_raw_coarse_and_subtracted_fine(self, tiny):
        fe, u, s, params = tiny
        seen = []

        def hook(step, pc, pf, pf_used):
            seen.append(step)
            np.testing.assert_allclose(pc.sum(axis=1), 1.0, atol=1e-9)
            for b in range(4):
                np.testing.assert_allclose(pf_used[b], subtract_and_renormalize(pf[b], 0.02))
            assert np.all(pf_used[pf <= 0.02] == 0) or np.all(pf <= 0.02)

        generate(InferenceNet(params, s), u.mel.frames, u.plan, fe.codec, fe.fb,
                 CFG.repeat, CFG.preemph, SamplerConfig(threshold=0.02), hook=hook)
        assert seen == list(range(u.plan.shape[0] * CFG.repeat))

    def test_forced_excitation_reaches_25db(self, tiny):
        fe, _, _, _ = tiny
        u = prepare_utterance(corpus.vowel(1.0), fe)
        y = generate(None, u.mel.frames, u.plan, fe.codec, fe.fb, CFG.repeat, CFG.preemph,
                     forced_excitation=u.targets.e_idx)
        assert snr_db(u.audio[:len(y)], y) >= 25.0

    def test_forced_excitation_shape_checked(self, tiny):
        fe, u, _, _ = tiny
        with pytest.raises(ValueError):
            generate(None, u.mel.frames, u.plan, fe.codec, fe.fb, CFG.repeat, CFG.preemph,
                     forced_excitation=np.zeros((4, 3), dtype=int))

    def test_non_finite_logits_abort(self, tiny):
        fe, u, s, params = tiny
        bad = dict(params)
        bad["coarse.b"] = np.full_like(params["coarse.b"], np.nan)
        with pytest.raises(NumericalError, match="step 0"):
            generate(InferenceNet(bad, s), u.mel.frames, u.plan, fe.codec, fe.fb,
                     CFG.repeat, CFG.preemph)

    def test_long_run_stays_finite(self, tiny):
        # 1e5 steps of saturated excitation through stable plans from real audio
        fe, _, _, _ = tiny
        u = prepare_utterance(corpus.two_tone(1.0), fe)
        reps = 100_000 // u.targets.e_idx.shape[1] + 1
        plan = np.tile(u.plan, (reps, 1, 1))
        e = np.random.default_rng(0).integers(0, 1024, (4, plan.shape[0] * CFG.repeat))
        y = generate(None, None, plan, fe.codec, fe.fb, CFG.repeat, CFG.preemph,
                     forced_excitation=e)
        assert np.all(np.isfinite(y))


def test_snr_edge_cases():
    assert snr_db([1.0, 2.0], [1.0, 2.0]) == float("inf")
    assert snr_db([1.0, 0.0], [0.0, 0.0]) == pytest.approx(0.0)
