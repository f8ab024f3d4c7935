"""SISO detector stages: equalization, cancellation, corner equivalences."""

import numpy as np
import pytest

from unfoldrx import detect, fad, numkit
from unfoldrx.constellation import qam16 as _qam16, qpsk as _qpsk

qam16 = _qam16()
qpsk = _qpsk()
from unfoldrx.errors import ConfigurationError
from unfoldrx.numkit import MulCounter, make_rng


def _random_block(rng, b=4, u=4, t=6, cons=qam16, ebn0_snr=None, noise=0.05):
    h = (rng.normal(size=(b, u)) + 1j * rng.normal(size=(b, u))) / np.sqrt(2)
    labels = rng.integers(0, len(cons.points), (t, u))
    s = cons.points[labels]
    y = s @ h.T + noise * (rng.normal(size=(t, b)) + 1j * rng.normal(size=(t, b)))
    return h / noise, y / noise, labels


def test_prepare_gram_and_matched_filter():
    rng = make_rng(0)
    h = rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2))
    y = rng.normal(size=(5, 3)) + 1j * rng.normal(size=(5, 3))
    prep = detect.prepare(h, y)
    assert np.allclose(prep.gram, np.conj(h.T) @ h)
    assert np.allclose(prep.y_mf, y @ np.conj(h))


def test_prepare_shape_mismatch():
    rng = make_rng(1)
    h = rng.normal(size=(3, 2))
    y = rng.normal(size=(5, 4))
    with pytest.raises(ConfigurationError):
        detect.prepare(h + 0j, y + 0j)


def test_lmmse_recovers_symbols_at_high_snr():
    rng = make_rng(2)
    h, y, labels = _random_block(rng, noise=0.01)
    out = detect.lmmse_detect(detect.prepare(h, y), qam16)
    hard = np.argmax(
        -np.abs(out.s_eq[..., None] - qam16.points) ** 2, axis=-1)
    assert np.array_equal(hard, labels)
    assert np.all(out.nu2 > 0)


def test_zero_prior_pic_equals_lmmse():
    """Explicit all-zero priors reproduce the structural zero-prior path."""
    rng = make_rng(3)
    h, y, _ = _random_block(rng, noise=0.2)
    prep = detect.prepare(h, y)
    ref = detect.lmmse_detect(prep, qam16)
    zeros = np.zeros(y.shape[:-1] + (4, 4))
    out = detect.mmse_pic_stage(prep, qam16, zeros)
    assert np.allclose(fad.val(out.llr_e), fad.val(ref.llr_e), atol=1e-8)
    assert np.allclose(fad.val(out.s_eq), fad.val(ref.s_eq), atol=1e-10)
    assert np.allclose(fad.val(out.nu2), fad.val(ref.nu2), atol=1e-10)


def test_loco_zeta_one_zero_prior_is_lmmse():
    rng = make_rng(4)
    h, y, _ = _random_block(rng, noise=0.2)
    prep = detect.prepare(h, y)
    ref = detect.lmmse_detect(prep, qam16)
    out = detect.loco_pic_stage(detect.loco_filters(prep), qam16, None, 1.0)
    assert np.allclose(fad.val(out.llr_e), fad.val(ref.llr_e), atol=1e-9)
    assert np.allclose(fad.val(out.s_eq), fad.val(ref.s_eq), atol=1e-11)


def test_loco_zeta_one_with_priors_matches_lmmse_filter():
    """With priors and zeta=1 the equalizer is still the LMMSE filter bank."""
    rng = make_rng(5)
    h, y, _ = _random_block(rng, noise=0.2)
    prep = detect.prepare(h, y)
    llr_a = rng.normal(size=y.shape[:-1] + (4, 4))
    out = detect.loco_pic_stage(detect.loco_filters(prep), qam16, llr_a, 1.0)
    s_a, _ = detect.soft_symbols(qam16, llr_a)
    minv = np.linalg.inv(np.conj(h.T) @ h + np.eye(4))
    mu = 1.0 - np.real(np.diag(minv))
    z = prep.y_mf - s_a @ (np.conj(h.T) @ h).T
    expect = (z @ minv.T) / mu + s_a
    assert np.allclose(fad.val(out.s_eq), expect, atol=1e-10)


def test_priors_sharpen_output():
    """Near-perfect priors push extrinsic LLRs toward the true bits."""
    rng = make_rng(6)
    h, y, labels = _random_block(rng, cons=qam16, noise=0.15)
    prep = detect.prepare(h, y)
    bits = qam16.labels[labels].astype(float)
    llr_a = 12.0 * (2.0 * bits - 1.0)
    for stage in (
        detect.mmse_pic_stage(prep, qam16, llr_a),
        detect.loco_pic_stage(detect.loco_filters(prep), qam16, llr_a, 0.5),
    ):
        hard = np.argmax(
            -np.abs(fad.val(stage.s_eq)[..., None] - qam16.points) ** 2, axis=-1)
        assert np.mean(hard == labels) > 0.95


def test_variance_floor_under_saturated_priors():
    rng = make_rng(7)
    h, y, labels = _random_block(rng, noise=0.2)
    prep = detect.prepare(h, y)
    bits = qam16.labels[labels].astype(float)
    llr_a = 200.0 * (2.0 * bits - 1.0)
    out = detect.mmse_pic_stage(prep, qam16, llr_a)
    assert np.all(fad.val(out.nu2) >= detect.VAR_FLOOR)
    assert np.all(np.isfinite(fad.val(out.llr_e)))


def test_loco_stage_cheaper_than_mmse_stage():
    rng = make_rng(8)
    h, y, _ = _random_block(rng, t=10, noise=0.2)
    prep = detect.prepare(h, y)
    llr_a = rng.normal(size=y.shape[:-1] + (4, 4))
    filters = detect.loco_filters(prep)
    with MulCounter() as c_loco:
        detect.loco_pic_stage(filters, qam16, llr_a, 0.5)
    with MulCounter() as c_mmse:
        detect.mmse_pic_stage(prep, qam16, llr_a)
    assert 0 < c_loco.real_mults < c_mmse.real_mults


def test_counts_deterministic():
    rng = make_rng(9)
    h, y, _ = _random_block(rng, noise=0.2)
    counts = []
    for _ in range(2):
        with MulCounter() as c:
            detect.lmmse_detect(detect.prepare(h, y), qam16)
        counts.append(c.real_mults)
    assert counts[0] == counts[1] > 0


def test_dual_stage_values_match_plain():
    rng = make_rng(10)
    h, y, _ = _random_block(rng, noise=0.2)
    prep = detect.prepare(h, y)
    llr_a = rng.normal(size=y.shape[:-1] + (4, 4))
    ref = detect.mmse_pic_stage(prep, qam16, llr_a)
    dual_a = fad.Dual(llr_a, np.zeros((2,) + llr_a.shape))
    dual = detect.mmse_pic_stage(prep, qam16, dual_a)
    assert np.allclose(fad.val(dual.llr_e), fad.val(ref.llr_e), atol=1e-12)


def test_qpsk_path_also_works():
    rng = make_rng(11)
    h, y, labels = _random_block(rng, cons=qpsk, noise=0.05)
    out = detect.lmmse_detect(detect.prepare(h, y), qpsk)
    hard = np.argmax(
        -np.abs(out.s_eq[..., None] - qpsk.points) ** 2, axis=-1)
    assert np.array_equal(hard, labels)
