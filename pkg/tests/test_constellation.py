"""Gray constellations, soft symbols, and max-log demapping oracles."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from unfoldrx import fad
from unfoldrx.constellation import by_name, qam16, qpsk
from unfoldrx.detect import maxlog_demap, soft_symbols


def test_qpsk_geometry():
    c = qpsk()
    assert c.bits_per_symbol == 2
    assert np.allclose(np.abs(c.points) ** 2, 1.0)


def test_qam16_unit_energy():
    c = qam16()
    assert c.bits_per_symbol == 4
    assert np.mean(np.abs(c.points) ** 2) == pytest.approx(1.0)


def test_by_name_aliases():
    assert by_name("qpsk").bits_per_symbol == 2
    assert by_name("16qam").bits_per_symbol == by_name("qam16").bits_per_symbol


def test_qpsk_llr_oracle_exact():
    """Equalized symbol 0.5 with unit NPI variance gives bit-0 LLR -sqrt(2)."""
    c = qpsk()
    s_eq = np.array([[0.5 + 0.0j]])
    nu2 = np.array([[1.0]])
    llr = maxlog_demap(c, s_eq, nu2)
    ref = c.maxlog_ref(0.5 + 0.0j, 1.0)
    assert abs(llr[0, 0, 0] - (-np.sqrt(2.0))) <= 1e-12
    assert np.allclose(llr[0, 0], ref, atol=1e-12)


def test_zero_prior_soft_symbols_exact():
    for c in (qpsk(), qam16()):
        s, nu2 = soft_symbols(c, np.zeros((1, 1, c.bits_per_symbol)))
        assert s[0, 0] == 0.0
        assert nu2[0, 0] == 1.0


@settings(deadline=None, max_examples=40)
@given(st.integers(0, 2 ** 31 - 1), st.sampled_from(["qpsk", "qam16"]))
def test_soft_symbols_match_enumeration(seed, name):
    c = by_name(name)
    rng = np.random.default_rng(seed)
    llr = rng.normal(size=(3, 2, c.bits_per_symbol)) * 4.0
    s, nu2 = soft_symbols(c, llr)
    for i in range(3):
        for j in range(2):
            s_ref, nu2_ref = c.soft_symbols_ref(llr[i, j])
            assert s[i, j] == pytest.approx(s_ref, abs=1e-12)
            assert nu2[i, j] == pytest.approx(nu2_ref, abs=1e-12)
            assert nu2[i, j] >= -1e-15


@settings(deadline=None, max_examples=40)
@given(st.integers(0, 2 ** 31 - 1), st.sampled_from(["qpsk", "qam16"]))
def test_maxlog_matches_enumeration(seed, name):
    c = by_name(name)
    rng = np.random.default_rng(seed)
    s_eq = (rng.normal(size=(4, 2)) + 1j * rng.normal(size=(4, 2))) * 0.8
    nu2 = rng.uniform(0.05, 2.0, size=(4, 2))
    llr = maxlog_demap(c, s_eq, nu2)
    for i in range(4):
        for j in range(2):
            ref = np.clip(c.maxlog_ref(s_eq[i, j], nu2[i, j]), -20.0, 20.0)
            assert np.allclose(llr[i, j], ref, atol=1e-11)


def test_maxlog_clips_at_20():
    c = qam16()
    llr = maxlog_demap(c, np.array([[10.0 + 10.0j]]), np.array([[1e-4]]))
    assert np.all(np.abs(llr) <= 20.0)


def test_map_bits_round_trip():
    for c in (qpsk(), qam16()):
        q = c.bits_per_symbol
        bits = ((np.arange(2 ** q)[:, None] >> np.arange(q - 1, -1, -1)) & 1)
        syms = c.map_bits(bits)
        assert np.array_equal(c.nearest_labels(syms), bits)


def test_soft_symbols_dual_matches_fd():
    c = qam16()
    rng = np.random.default_rng(7)
    llr = rng.normal(size=(1, 1, 4)) * 2.0
    flat = llr.reshape(-1)
    d = fad.seed_params(flat).reshape((1, 1, 4))
    s, nu2 = soft_symbols(c, d)
    h = 1e-6
    for k in range(4):
        lp, lm = flat.copy(), flat.copy()
        lp[k] += h
        lm[k] -= h
        sp, np2p = c.soft_symbols_ref(lp)
        sm, np2m = c.soft_symbols_ref(lm)
        assert fad.val(s.tan)[k, 0, 0] == pytest.approx((sp - sm) / (2 * h), abs=1e-6)
        assert fad.val(nu2.tan)[k, 0, 0] == pytest.approx((np2p - np2m) / (2 * h), abs=1e-6)
