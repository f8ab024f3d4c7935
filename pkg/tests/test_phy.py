"""Frame geometry, pilots, channel estimation, whitening, and dump IO."""

import numpy as np
import pytest

from unfoldrx import phy, simulate
from unfoldrx.errors import ConfigurationError, InputError
from unfoldrx.numkit import make_rng


def test_default_frame_geometry():
    cfg = simulate.default_config()
    assert (cfg.users, cfg.bs_antennas) == (4, 4)
    assert (cfg.subcarriers, cfg.symbols) == (60, 14)
    assert cfg.n_pilot_symbols == 4
    assert cfg.n_data_symbols == 10
    assert cfg.n_res == 600
    assert cfg.n_coded_bits == 2400
    assert cfg.n_data_bits == 1200
    assert cfg.rate == pytest.approx(0.5)


def test_default_pilot_slots_disjoint_groups():
    slots = phy.default_pilot_slots()
    assert sorted(s.symbol for s in slots) == [3, 4, 12, 13]
    by_symbol = {s.symbol: tuple(s.users) for s in slots}
    assert by_symbol[3] == by_symbol[12] == (0, 1)
    assert by_symbol[4] == by_symbol[13] == (2, 3)


def test_pilot_combs_are_orthogonal():
    """Within a slot, users occupy interleaved disjoint subcarrier combs."""
    for slot in phy.default_pilot_slots():
        n = len(slot.users)
        combs = [set(range(j, 60, n)) for j in range(n)]
        assert not combs[0] & combs[1]
        assert sorted(set().union(*combs)) == list(range(60))


def test_ebn0_to_n0_values():
    # R=1/2, Q=4: at 0 dB, N0 = 1/2
    assert phy.ebn0_to_n0(0.0, 0.5, 4) == pytest.approx(0.5)
    assert phy.ebn0_to_n0(10.0, 0.5, 4) == pytest.approx(0.05)
    with pytest.raises(ConfigurationError):
        phy.ebn0_to_n0(0.0, 0.0, 4)


def test_whiten_scales_to_unit_noise():
    rng = np.random.default_rng(0)
    y = rng.normal(size=(5, 3)) + 1j * rng.normal(size=(5, 3))
    h = rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2))
    n0, err = 0.5, 0.25
    y_w, h_w = phy.whiten(y, h, err, n0)
    scale = 1.0 / np.sqrt(n0 + err)
    assert np.allclose(y_w, y * scale)
    assert np.allclose(h_w, h * scale)


def test_map_frame_bits_energy():
    cfg = simulate.default_config()
    rng = np.random.default_rng(1)
    bits = rng.integers(0, 2, (4, cfg.code.n)).astype(np.uint8)
    s = phy.map_frame_bits(bits, cfg.constellation)
    assert s.shape == (4, cfg.n_res)
    assert np.mean(np.abs(s) ** 2) == pytest.approx(1.0, rel=0.05)


def test_rayleigh_block_shape_and_stats():
    cfg = simulate.default_config()
    rng = make_rng(0)
    h = phy.rayleigh_block(cfg, rng)
    assert h.shape == (60, 4, 4)
    draws = np.stack([phy.rayleigh_block(cfg, rng) for _ in range(200)])
    assert np.mean(np.abs(draws) ** 2) == pytest.approx(1.0, rel=0.05)


def test_rayleigh_single_tap_is_frequency_flat():
    import dataclasses
    cfg = dataclasses.replace(simulate.default_config(), delay_taps=1)
    h = phy.rayleigh_block(cfg, make_rng(2))
    assert np.allclose(h, h[0], atol=1e-12)


def test_rayleigh_two_tap_frequency_correlation():
    """Adjacent subcarriers are strongly correlated; with two uniform taps
    the response at half the DFT span is uncorrelated with subcarrier 0."""
    cfg = simulate.default_config()
    assert cfg.delay_taps == 2
    rng = make_rng(5)
    draws = np.stack([phy.rayleigh_block(cfg, rng) for _ in range(4000)])
    h0 = draws[:, 0].ravel()
    adj = np.mean(h0 * np.conj(draws[:, 1].ravel()))
    far = np.mean(h0 * np.conj(draws[:, 30].ravel()))
    assert abs(adj) > 0.95
    assert abs(far) < 0.05


def test_rayleigh_rejects_bad_tap_count():
    import dataclasses
    with pytest.raises(ConfigurationError):
        dataclasses.replace(simulate.default_config(), delay_taps=0)
    with pytest.raises(ConfigurationError):
        dataclasses.replace(simulate.default_config(), delay_taps=61)


def test_ls_estimate_noiseless_recovers_channel():
    """With zero noise and a frequency-flat channel, LS is exact."""
    cfg = simulate.default_config()
    rng = make_rng(3)
    h_flat = (rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))) / np.sqrt(2)
    h = np.broadcast_to(h_flat, (60, 4, 4)).copy()
    y_p = phy.simulate_pilot_rx(cfg, h, 0.0, rng)
    h_hat, err_var = phy.ls_estimate(y_p, cfg, 1e-3)
    assert h_hat.shape == (600, 4, 4)
    assert np.allclose(h_hat, np.broadcast_to(h_flat, (600, 4, 4)), atol=1e-10)
    assert err_var == pytest.approx(1e-3)


def test_gen_frames_deterministic_per_index():
    cfg = simulate.default_config()
    a = simulate.gen_frames(cfg, 5.0, seed=9, frame_indices=[3, 4])
    b = simulate.gen_frames(cfg, 5.0, seed=9, frame_indices=[4])
    assert np.array_equal(a.y[1], b.y[0])
    assert np.array_equal(a.data_bits[1], b.data_bits[0])
    c = simulate.gen_frames(cfg, 5.0, seed=10, frame_indices=[4])
    assert not np.array_equal(b.y[0], c.y[0])


def test_gen_frames_external_channels():
    cfg = simulate.default_config()
    rng = make_rng(4)
    chans = (rng.normal(size=(2, 4, 4)) + 1j * rng.normal(size=(2, 4, 4)))
    batch = simulate.gen_frames(cfg, 20.0, seed=1, frame_indices=[0, 1, 2],
                                channels=chans)
    n0 = phy.ebn0_to_n0(20.0, cfg.rate, 4)
    scale = 1.0 / np.sqrt(n0)
    assert np.allclose(batch.h_eff[0], chans[0] * scale)
    assert np.allclose(batch.h_eff[2], chans[0] * scale)   # index 2 wraps
    bad = rng.normal(size=(1, 3, 3))
    with pytest.raises(ConfigurationError):
        simulate.gen_frames(cfg, 20.0, seed=1, frame_indices=[0], channels=bad)


def test_channel_dump_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    h = (rng.normal(size=(2, 3, 4, 2, 2))
         + 1j * rng.normal(size=(2, 3, 4, 2, 2)))
    path = tmp_path / "chan.bin"
    phy.save_channel_dump(str(path), h)
    back = phy.load_channel_dump(str(path))
    assert back.shape == h.shape
    assert np.mean(np.abs(back) ** 2) == pytest.approx(1.0, rel=1e-3)


def test_channel_dump_rejects_garbage(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"not a dump at all")
    with pytest.raises(InputError):
        phy.load_channel_dump(str(path))


def test_channel_dump_rejects_truncation(tmp_path):
    rng = np.random.default_rng(6)
    h = (rng.normal(size=(1, 2, 2, 2, 2))
         + 1j * rng.normal(size=(1, 2, 2, 2, 2)))
    path = tmp_path / "trunc.bin"
    phy.save_channel_dump(str(path), h)
    data = path.read_bytes()
    path.write_bytes(data[:-7])
    with pytest.raises(InputError):
        phy.load_channel_dump(str(path))


def test_frame_config_validates_code_length():
    cfg = simulate.default_config()
    with pytest.raises(ConfigurationError):
        phy.FrameConfig(users=4, bs_antennas=4, subcarriers=59, symbols=14,
                        pilot_slots=cfg.pilot_slots,
                        constellation=cfg.constellation, code=cfg.code)
