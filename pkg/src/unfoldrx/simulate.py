"""End-to-end frame simulation: transmit, channel, estimate, whiten, receive.

Every frame is generated from its own RNG stream derived from
``(seed, frame_index)``, so a frame's bits, channel and noise are identical
no matter how frames are batched or distributed over workers.  Draw order
within a frame: data bits, channel, pilot noise (when estimating), data
noise.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from importlib import resources
from typing import Optional, Sequence

import numpy as np

from . import ldpc, numkit, phy, pipeline
from .constellation import by_name
from .errors import ConfigurationError


@functools.lru_cache(maxsize=1)
def load_bundled_code() -> ldpc.LdpcCode:
    """The bundled rate-1/2 (3,6)-regular length-2400 LDPC code."""
    ref = resources.files("unfoldrx.assets").joinpath("ldpc_n2400_r12.alist")
    return ldpc.parse_alist(ref.read_text())


def default_config(bs_antennas: int = 4) -> phy.FrameConfig:
    """4 users, 60 subcarriers, 14 symbols (4 pilot slots), 16-QAM,
    bundled rate-1/2 code."""
    return phy.FrameConfig(
        users=4, bs_antennas=bs_antennas, subcarriers=60, symbols=14,
        pilot_slots=phy.default_pilot_slots(), constellation=by_name("qam16"),
        code=load_bundled_code())


# ---------------------------------------------------------------------------
# frame generation

@dataclass
class FrameBatch:
    """Whitened observations plus ground truth for a batch of frames."""
    h_eff: np.ndarray       # (F, W, B, U) whitened channel at the receiver
    y: np.ndarray           # (F, W, T_D, B) whitened data observations
    bits: np.ndarray        # (F, U, n) coded bits
    data_bits: np.ndarray   # (F, U, k)
    ebn0_db: np.ndarray     # (F,)


def _symbol_grid(cfg: phy.FrameConfig, symbols: np.ndarray) -> np.ndarray:
    """(U, V) data symbols to a (T_D, W, U) grid; RE order v = t*W + w."""
    u = cfg.users
    return np.transpose(
        symbols.reshape(u, cfg.n_data_symbols, cfg.subcarriers), (1, 2, 0))


def gen_frames(cfg: phy.FrameConfig, ebn0_db, seed: int,
               frame_indices: Sequence[int], perfect_csi: bool = True,
               channels: Optional[np.ndarray] = None) -> FrameBatch:
    """Generate, transmit and whiten a batch of frames.

    ``ebn0_db`` is a scalar or one value per frame.  ``channels`` optionally
    supplies frame-constant (B, U) matrices indexed by frame (entry
    ``channels[frame_index % len(channels)]``) instead of Rayleigh fading.
    """
    code = cfg.code
    cons = cfg.constellation
    frame_indices = list(frame_indices)
    f = len(frame_indices)
    ebn0 = np.broadcast_to(np.asarray(ebn0_db, dtype=float), (f,))
    w, b, u, td = (cfg.subcarriers, cfg.bs_antennas, cfg.users,
                   cfg.n_data_symbols)

    h_eff = np.empty((f, w, b, u), dtype=np.complex128)
    y_out = np.empty((f, w, td, b), dtype=np.complex128)
    bits = np.empty((f, u, code.n), dtype=np.uint8)
    data = np.empty((f, u, code.k), dtype=np.uint8)

    for j, idx in enumerate(frame_indices):
        rng = numkit.make_rng(seed, int(idx))
        n0 = phy.ebn0_to_n0(ebn0[j], cfg.rate, cons.bits_per_symbol)
        d = rng.integers(0, 2, (u, code.k)).astype(np.uint8)
        cw = code.encode(d)
        s = phy.map_frame_bits(cw, cons)                    # (U, V)
        if channels is not None:
            h = np.asarray(channels[int(idx) % len(channels)])
            if h.shape == (b, u):                           # frame-constant
                h = np.broadcast_to(h, (w, b, u)).copy()
            if h.shape != (w, b, u):
                raise ConfigurationError(
                    f"external channel shape {h.shape} != ({w}, {b}, {u})")
        else:
            h = phy.rayleigh_block(cfg, rng)                # (W, B, U)
        if perfect_csi:
            h_hat, err_var = h, 0.0
        else:
            y_p = phy.simulate_pilot_rx(cfg, h, n0, rng)
            h_hat_res, err_var = phy.ls_estimate(y_p, cfg, n0)
            # time-constant channel: collapse the per-RE estimate to one
            # matrix per subcarrier (average over the data symbols)
            h_hat = h_hat_res.reshape(td, w, b, u).mean(axis=0)
        grid = _symbol_grid(cfg, s)                         # (T_D, W, U)
        noise = (rng.standard_normal((td, w, b))
                 + 1j * rng.standard_normal((td, w, b))) * np.sqrt(n0 / 2.0)
        y = np.einsum("wbu,twu->twb", h, grid) + noise      # (T_D, W, B)
        y_w, h_w = phy.whiten(y, h_hat, err_var, n0)
        h_eff[j] = h_w
        y_out[j] = np.transpose(y_w, (1, 0, 2))             # (W, T_D, B)
        bits[j] = cw
        data[j] = d

    return FrameBatch(h_eff=h_eff, y=y_out, bits=bits, data_bits=data,
                      ebn0_db=np.array(ebn0))


# ---------------------------------------------------------------------------
# receive and score

@dataclass
class BatchResult:
    rx: pipeline.RxResult
    bit_errors: int
    block_errors: int
    n_bits: int
    n_blocks: int


def receive_frames(cfg: phy.FrameConfig, batch: FrameBatch,
                   params: pipeline.HyperParamSet,
                   keep_stage_outputs: bool = False) -> BatchResult:
    """Run the receiver and score against the transmitted data bits.

    A block is one user's codeword, so a frame carries U blocks.
    """
    rx = pipeline.run_receiver(cfg, cfg.code, batch.h_eff, batch.y, params,
                               keep_stage_outputs=keep_stage_outputs)
    errs = rx.data_bits != batch.data_bits                  # (F, U, k)
    return BatchResult(
        rx=rx,
        bit_errors=int(errs.sum()),
        block_errors=int(errs.any(axis=-1).sum()),
        n_bits=int(errs.size),
        n_blocks=int(errs.shape[0] * errs.shape[1]))
