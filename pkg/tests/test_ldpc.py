"""LDPC code container, encoder, alist IO, and SISO decoder oracles."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import reference_ldpc
from unfoldrx import fad, ldpc
from unfoldrx.errors import ConfigurationError, InputError
from unfoldrx.numkit import make_rng


def toy_code():
    """Two variables, one check: H = [1 1]."""
    return ldpc.LdpcCode(n=2, m=1, vn_adj=[[0], [0]])


def small_random_code(seed, n=96, m=48):
    rng = make_rng(seed, 77)
    return ldpc.peg_construct(n, m, var_degree=3, rng=rng)


def test_toy_single_iteration_exact():
    code = toy_code()
    l1, l2 = 1.25, -0.75
    out, _ = ldpc.decode_siso(code, np.array([l1, l2]), None, 1)
    assert out[0] == l1 + l2
    assert out[1] == l1 + l2


def test_encode_all_zero_and_syndrome():
    code = small_random_code(0)
    assert np.array_equal(code.encode(np.zeros(code.k, dtype=np.uint8)),
                          np.zeros(code.n, dtype=np.uint8))
    rng = np.random.default_rng(1)
    d = rng.integers(0, 2, code.k).astype(np.uint8)
    cw = code.encode(d)
    assert not code.syndrome(cw).any()
    assert np.array_equal(cw[code.data_positions], d)


def test_encode_linearity():
    code = small_random_code(1)
    rng = np.random.default_rng(2)
    d1 = rng.integers(0, 2, code.k).astype(np.uint8)
    d2 = rng.integers(0, 2, code.k).astype(np.uint8)
    assert np.array_equal(code.encode(d1) ^ code.encode(d2),
                          code.encode(d1 ^ d2))


def test_bundled_code_profile():
    from unfoldrx.simulate import load_bundled_code
    code = load_bundled_code()
    assert (code.n, code.m, code.k) == (2400, 1200, 1200)
    degrees_v = np.bincount(code.edge_vn, minlength=code.n)
    assert np.all(degrees_v == 3)
    degrees_c = np.bincount(code.edge_cn, minlength=code.m)
    assert np.all(degrees_c == 6)


def test_alist_round_trip(tmp_path):
    code = small_random_code(2, n=24, m=12)
    path = tmp_path / "code.alist"
    path.write_text(ldpc.dump_alist(code))
    back = ldpc.load_alist(str(path))
    assert back.n == code.n and back.m == code.m
    assert [list(a) for a in back.vn_adj] == [list(a) for a in code.vn_adj]


def test_alist_bad_index_rejected(tmp_path):
    path = tmp_path / "bad.alist"
    path.write_text("2 1\n1 1\n1 1\n1\n2\n5\n2\n1 2\n")
    with pytest.raises(InputError):
        ldpc.load_alist(str(path))


def test_alist_inconsistent_degree_rejected(tmp_path):
    path = tmp_path / "bad2.alist"
    path.write_text("2 1\n2 2\n1 1\n2\n1\n1 0\n1\n1 2\n")
    with pytest.raises(InputError):
        ldpc.load_alist(str(path))


def test_decode_validates_inputs():
    code = toy_code()
    with pytest.raises(ConfigurationError):
        ldpc.decode_siso(code, np.zeros(3), None, 1)
    with pytest.raises(ConfigurationError):
        ldpc.decode_siso(code, np.zeros(2), None, 0)
    bad_state = ldpc.DecoderState(np.zeros(5))
    with pytest.raises(ConfigurationError):
        ldpc.decode_siso(code, np.zeros(2), bad_state, 1)
    damp = ldpc.DampingParams(np.zeros(3), np.zeros(3))
    with pytest.raises(ConfigurationError):
        ldpc.decode_siso(code, np.zeros(2), None, 3, damp, j_offset=1)


def test_hard_decide_rules():
    llr = np.array([3.2, -0.1, 0.0, 1e9, -1e9])
    assert np.array_equal(ldpc.hard_decide(llr), [1, 0, 0, 1, 0])


def test_scale_state():
    st0 = ldpc.DecoderState(np.array([2.0, -4.0]))
    assert np.array_equal(ldpc.scale_state(st0, 0.5).messages, [1.0, -2.0])
    assert np.array_equal(ldpc.scale_state(st0, 0.0).messages, [0.0, 0.0])
    assert ldpc.scale_state(st0, 1.0).messages is st0.messages


def test_damping_update_rule_example():
    """raw=3, previous=1, phi=2, mu=xi=0.25 -> 2.25."""
    out = ldpc._damped_blend(np.array(3.0), np.array(1.0), np.array(2.0),
                             0.25, 0.25)
    assert out == pytest.approx(2.25)


def test_damping_weights_clamped_mode():
    damp = ldpc.DampingParams(np.array([0.8, -0.5]), np.array([0.8, 0.2]),
                              allow_overshoot=False)
    mu, xi = damp.weights(0)
    assert mu + xi == pytest.approx(1.0)
    mu, xi = damp.weights(1)
    assert mu == 0.0 and xi == pytest.approx(0.2)


def test_saturated_codeword_decodes_in_one_iteration():
    code = small_random_code(3)
    rng = np.random.default_rng(4)
    cw = code.encode(rng.integers(0, 2, code.k).astype(np.uint8))
    llr = np.where(cw == 1, 40.0, -40.0)
    out, _ = ldpc.decode_siso(code, llr, None, 1)
    bits = ldpc.hard_decide(out)
    assert np.array_equal(bits, cw)
    assert not code.syndrome(bits).any()


def test_matches_reference_decoder_batch():
    rng = np.random.default_rng(5)
    for trial in range(5):
        code = small_random_code(10 + trial)
        llr = rng.normal(size=code.n) * 3.0
        iters = int(rng.integers(1, 9))
        out, _ = ldpc.decode_siso(code, llr, None, iters)
        ref = reference_ldpc.decode([list(a) for a in code.vn_adj],
                                    llr.tolist(), iters)
        assert np.allclose(out, ref, atol=1e-9, rtol=0)


def test_chained_equals_single_run():
    code = small_random_code(6)
    rng = np.random.default_rng(7)
    llr = rng.normal(size=(2, code.n)) * 2.5
    damp = ldpc.DampingParams(rng.uniform(0, 0.3, 12), rng.uniform(0, 0.3, 12))
    full, _ = ldpc.decode_siso(code, llr, None, 12, damp)
    h1, state = ldpc.decode_siso(code, llr, None, 5, damp)
    state = ldpc.scale_state(state, 1.0)
    h2, _ = ldpc.decode_siso(code, llr, state, 7, damp, j_offset=5)
    assert np.array_equal(full, h2)


def test_decoding_reduces_ber():
    code = small_random_code(8)
    rng = np.random.default_rng(9)
    cw = code.encode(rng.integers(0, 2, code.k).astype(np.uint8))
    sigma = 0.7
    x = 1.0 - 2.0 * cw.astype(float)            # bit 1 -> -1
    y = x + rng.normal(size=code.n) * sigma
    llr = -2.0 * y / sigma ** 2                 # L = log P(1)/P(0)
    before = int((ldpc.hard_decide(llr) != cw).sum())
    out, _ = ldpc.decode_siso(code, llr, None, 12)
    after = int((ldpc.hard_decide(out) != cw).sum())
    assert after <= before


def test_dual_decode_matches_plain_values():
    code = small_random_code(11, n=48, m=24)
    rng = np.random.default_rng(12)
    llr = rng.normal(size=code.n) * 2.0
    damp_vec = np.concatenate([np.full(4, 0.2), np.full(4, 0.1)])
    dual = fad.seed_params(damp_vec)
    damp = ldpc.DampingParams(dual[:4], dual[4:])
    out_d, _ = ldpc.decode_siso(code, llr, None, 4, damp)
    damp_p = ldpc.DampingParams(damp_vec[:4], damp_vec[4:])
    out_p, _ = ldpc.decode_siso(code, llr, None, 4, damp_p)
    assert np.allclose(fad.val(out_d), out_p, atol=1e-12)
    h = 1e-5
    for k in (0, 5):
        vp, vm = damp_vec.copy(), damp_vec.copy()
        vp[k] += h
        vm[k] -= h
        op, _ = ldpc.decode_siso(code, llr, None, 4,
                                 ldpc.DampingParams(vp[:4], vp[4:]))
        om, _ = ldpc.decode_siso(code, llr, None, 4,
                                 ldpc.DampingParams(vm[:4], vm[4:]))
        fd = (op - om) / (2 * h)
        assert np.allclose(fad.val(out_d.tan)[k], fd, atol=5e-4)


@settings(deadline=None, max_examples=15)
@given(st.integers(0, 10 ** 6))
def test_peg_regularity(seed):
    rng = make_rng(seed)
    code = ldpc.peg_construct(24, 12, var_degree=3, rng=rng)
    assert np.all(np.bincount(code.edge_vn, minlength=24) == 3)
    assert np.all(np.bincount(code.edge_cn, minlength=12) == 6)
