from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from featherwave.complexity import (LPCNET_FLOPS, ComplexityConfig, architecture_flops,
                                    compare_baseline, estimate_flops, format_report)
from featherwave.config import RunConfig

PAPER = ComplexityConfig(384, 0.1, 32, 128, 4, 16000)


def exact(ng, d, q, nf, nb, fs):
    d = Fraction(d)
    return (3 * d * ng * ng + ng * nf + 2 * nf * q * nb) * 2 * fs / nb


def test_formula_at_16k():
    assert estimate_flops(PAPER) == 1_009_254_400
    assert exact(384, "0.1", 32, 128, 4, 16000) == 1_009_254_400


def test_formula_at_24k():
    c = ComplexityConfig(384, 0.1, 32, 128, 4, 24000)
    assert estimate_flops(c) == 1_513_881_600


def test_from_run_config_uses_final_density():
    c = ComplexityConfig.from_run_config(RunConfig(), sample_rate=16000)
    assert c.density == 0.1
    assert estimate_flops(c) == 1_009_254_400


def test_zero_density_drops_recurrent_term():
    c = ComplexityConfig(384, 0.0, 32, 128, 4, 16000)
    assert estimate_flops(c) == (384 * 128 + 2 * 128 * 32 * 4) * 2 * 16000 / 4


def test_single_band():
    c = ComplexityConfig(384, 0.1, 32, 128, 1, 16000)
    assert estimate_flops(c) == float(exact(384, "0.1", 32, 128, 1, 16000))


def test_architecture_count_is_superset():
    assert architecture_flops(PAPER) >= estimate_flops(PAPER)
    extra = 4 * 16 * 32 * 4 * 2 * 16000 / 4
    assert architecture_flops(PAPER) - estimate_flops(PAPER) == pytest.approx(extra)


def test_report_flags_quoted_mismatch():
    rep = compare_baseline(PAPER)
    assert rep["lpcnet_flops"] == LPCNET_FLOPS == 2.8e9
    assert rep["ratio_vs_lpcnet"] == pytest.approx(1_009_254_400 / 2.8e9)
    assert rep["quoted_mismatch"]
    text = format_report(rep)
    assert "1.6" in text and "1.009" in text


def test_no_mismatch_flag_at_24k():
    assert not compare_baseline(ComplexityConfig(384, 0.1, 32, 128, 4, 24000))["quoted_mismatch"]


@pytest.mark.parametrize("kwargs", [dict(gru_units=0), dict(density=1.5), dict(sample_rate=-1)])
def test_invalid(kwargs):
    with pytest.raises(ValueError):
        ComplexityConfig(**kwargs)


@given(st.integers(1000, 96000), st.integers(1, 8))
def test_linear_in_sample_rate(fs, k):
    a = estimate_flops(ComplexityConfig(sample_rate=fs))
    b = estimate_flops(ComplexityConfig(sample_rate=fs * k))
    assert b == pytest.approx(k * a, rel=1e-12)


@given(st.sampled_from([1, 2, 4, 8]))
def test_band_count_scaling(nb):
    # per-step cost changes only through the output heads; step rate is 2 F_S / N_B
    c = ComplexityConfig(n_bands=nb)
    per_step = 3 * 0.1 * 384 ** 2 + 384 * 128 + 2 * 128 * 32 * nb
    assert estimate_flops(c) == pytest.approx(per_step * 2 * 16000 / nb, rel=1e-12)
