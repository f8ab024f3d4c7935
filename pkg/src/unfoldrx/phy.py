"""Transmit chain, channel generation, LS channel estimation, and whitening.

The model is per resource element (RE) in the frequency domain: within one
OFDM frame, W subcarriers by T symbols, of which T_P symbol slots carry
pilots and the remaining T_D carry data.  Channels are frame-constant in
Rayleigh mode (block fading over the whole frame).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .constellation import Constellation
from .errors import ConfigurationError, InputError, NumericalError

DUMP_MAGIC = b"MIMO-CHDUMP-0001"


# ---------------------------------------------------------------------------
# frame geometry

@dataclass(frozen=True)
class PilotSlot:
    symbol: int                 # absolute OFDM-symbol index in 0..T-1
    users: Tuple[int, ...]      # users transmitting in this slot
    # user users[i] occupies subcarriers i, i+n, i+2n, ... (disjoint combs)


@dataclass(frozen=True)
class FrameConfig:
    users: int
    bs_antennas: int
    subcarriers: int
    symbols: int
    pilot_slots: Tuple[PilotSlot, ...]
    constellation: Constellation
    code: object                # LdpcCode-like: .n coded bits, .k data bits
    delay_taps: int = 2         # i.i.d. taps behind the frequency response

    def __post_init__(self):
        if not 1 <= self.delay_taps <= self.subcarriers:
            raise ConfigurationError(
                f"delay_taps must be in [1, {self.subcarriers}]")
        if self.n_pilot_symbols >= self.symbols:
            raise ConfigurationError("pilot symbols must leave room for data")
        if self.code.n != self.n_coded_bits:
            raise ConfigurationError(
                f"code length {self.code.n} != grid capacity {self.n_coded_bits}")

    @property
    def n_pilot_symbols(self) -> int:
        return len(self.pilot_slots)

    @property
    def n_data_symbols(self) -> int:
        return self.symbols - self.n_pilot_symbols

    @property
    def data_symbol_indices(self) -> np.ndarray:
        pilots = {s.symbol for s in self.pilot_slots}
        return np.array([t for t in range(self.symbols) if t not in pilots])

    @property
    def n_res(self) -> int:
        """Data REs per frame (V)."""
        return self.subcarriers * self.n_data_symbols

    @property
    def n_coded_bits(self) -> int:
        return self.n_res * self.constellation.bits_per_symbol

    @property
    def n_data_bits(self) -> int:
        return self.code.k

    @property
    def rate(self) -> float:
        return self.code.k / self.code.n


def kronecker_pilots(symbols: Sequence[int], user_groups: Sequence[Sequence[int]]
                     ) -> Tuple[PilotSlot, ...]:
    """One slot per entry of ``symbols``; users in a group share a slot on
    disjoint subcarrier combs."""
    if len(symbols) != len(user_groups):
        raise ConfigurationError("pilot symbols and user groups differ in length")
    return tuple(PilotSlot(t, tuple(g)) for t, g in zip(symbols, user_groups))


def default_pilot_slots() -> Tuple[PilotSlot, ...]:
    """Two slots per user pair: symbols {3, 12} for users 0-1, {4, 13} for 2-3."""
    return kronecker_pilots([3, 12, 4, 13], [(0, 1), (0, 1), (2, 3), (2, 3)])


# ---------------------------------------------------------------------------
# transmit side

def map_frame_bits(bits: np.ndarray, c: Constellation) -> np.ndarray:
    """Map (..., K) coded bits to (..., V) symbols, K = V*Q, bits in symbol
    order (symbol v carries bits v*Q .. v*Q+Q-1)."""
    q = c.bits_per_symbol
    if bits.shape[-1] % q:
        raise ConfigurationError(
            f"bit count {bits.shape[-1]} not divisible by Q={q}")
    return c.map_bits(bits.reshape(bits.shape[:-1] + (-1, q)))


# ---------------------------------------------------------------------------
# channels

@dataclass
class ChannelRealization:
    """True channel, its estimate, and the noise model for one frame.

    ``h`` and ``h_hat`` are (B, U) when frame-constant or (V, B, U) per data
    RE; ``err_var`` is the white estimation-error variance (C_E = err_var*I).
    """
    h: np.ndarray
    h_hat: np.ndarray
    err_var: float
    n0: float

    @property
    def noise_cov_scale(self) -> float:
        return self.err_var + self.n0


def rayleigh_block(cfg: FrameConfig, rng: np.random.Generator) -> np.ndarray:
    """Rayleigh channel matrices, one per subcarrier, time-constant.

    A tapped-delay-line realization: ``delay_taps`` i.i.d. CN(0, 1/L) taps
    per antenna pair, mapped to the W subcarriers by a DFT.  Per-subcarrier
    marginals are CN(0,1); nearby subcarriers are correlated, so the
    frequency diversity seen by one codeword is set by the tap count.  Each
    subcarrier is its own coherent block over the frame duration, the same
    granularity the per-block receiver filters amortize over.
    """
    w, b, u = cfg.subcarriers, cfg.bs_antennas, cfg.users
    n_taps = cfg.delay_taps
    taps = (rng.standard_normal((n_taps, b, u))
            + 1j * rng.standard_normal((n_taps, b, u))) / np.sqrt(2.0 * n_taps)
    dft = np.exp(-2j * np.pi * np.outer(np.arange(w), np.arange(n_taps)) / w)
    return np.tensordot(dft, taps, axes=(1, 0))


def ebn0_to_n0(ebn0_db: float, rate: float, bits_per_symbol: int) -> float:
    """Noise power for unit-energy symbols; pilot overhead excluded."""
    if rate <= 0 or bits_per_symbol <= 0:
        raise ConfigurationError("rate and bits/symbol must be positive")
    return 1.0 / (rate * bits_per_symbol * 10.0 ** (ebn0_db / 10.0))


def whiten(y: np.ndarray, h_hat: np.ndarray, err_var: float, n0: float):
    """Whitened receive vector(s) and channel estimate.

    With the white error model C_n' = (err_var + n0) I this is a division by
    sqrt(err_var + n0).
    """
    c = err_var + n0
    if not np.isfinite(c) or c <= 0:
        raise NumericalError(f"effective noise covariance scale {c} not positive")
    s = 1.0 / np.sqrt(c)
    return y * s, h_hat * s


# ---------------------------------------------------------------------------
# pilots and LS estimation

def pilot_value(user: int, subcarrier: int) -> complex:
    # unit-modulus pilots; orthogonality comes from the disjoint combs
    return 1.0 + 0.0j


def simulate_pilot_rx(cfg: FrameConfig, h: np.ndarray, n0: float,
                      rng: np.random.Generator) -> np.ndarray:
    """Received pilot grid, one (W, B) slab per configured pilot slot."""
    w, b = cfg.subcarriers, cfg.bs_antennas
    out = np.empty((cfg.n_pilot_symbols, w, b), dtype=np.complex128)
    for i, slot in enumerate(cfg.pilot_slots):
        grid = np.zeros((w, b), dtype=np.complex128)
        n = len(slot.users)
        for j, u in enumerate(slot.users):
            scs = np.arange(j, w, n)
            vals = np.array([pilot_value(u, s) for s in scs])
            grid[scs] = vals[:, None] * h[scs, :, u]
        noise = (rng.standard_normal((w, b)) + 1j * rng.standard_normal((w, b)))
        grid += noise * np.sqrt(n0 / 2.0)
        out[i] = grid
    return out


def _interp_columns(x_known: np.ndarray, y_known: np.ndarray,
                    x_query: np.ndarray) -> np.ndarray:
    """Linear interpolation (with edge extrapolation) along axis 0."""
    out_shape = (len(x_query),) + y_known.shape[1:]
    flat = y_known.reshape(len(x_known), -1)
    cols = np.empty((len(x_query), flat.shape[1]), dtype=flat.dtype)
    for j in range(flat.shape[1]):
        re = np.interp(x_query, x_known, flat[:, j].real)
        im = np.interp(x_query, x_known, flat[:, j].imag)
        cols[:, j] = re + 1j * im
    if len(x_known) >= 2:  # np.interp clamps; extend the edge slopes instead
        lo, hi = x_known[0], x_known[-1]
        below = x_query < lo
        above = x_query > hi
        if below.any() or above.any():
            slope = (flat[1] - flat[0]) / (x_known[1] - x_known[0])
            for j in range(flat.shape[1]):
                cols[below, j] = flat[0, j] + slope[j] * (x_query[below] - lo)
            slope = (flat[-1] - flat[-2]) / (x_known[-1] - x_known[-2])
            for j in range(flat.shape[1]):
                cols[above, j] = flat[-1, j] + slope[j] * (x_query[above] - hi)
    return cols.reshape(out_shape)


def ls_estimate(y_pilots: np.ndarray, cfg: FrameConfig, n0: float
                ) -> Tuple[np.ndarray, float]:
    """Per-data-RE LS channel estimate with bilinear interpolation.

    Returns ``(h_hat, err_var)`` with ``h_hat`` of shape (V, B, U) in data-RE
    order (symbol-major: RE index v = t_d * W + w) and the white estimation
    error variance err_var = N0 / (pilot energy per estimate).
    """
    if cfg.n_pilot_symbols == 0:
        raise ConfigurationError("no pilot slots configured")
    w, b, u = cfg.subcarriers, cfg.bs_antennas, cfg.users
    per_user_slots: dict[int, list[tuple[int, np.ndarray]]] = {}
    for i, slot in enumerate(cfg.pilot_slots):
        n = len(slot.users)
        for j, user in enumerate(slot.users):
            scs = np.arange(j, w, n)
            vals = np.array([pilot_value(user, s) for s in scs])
            est = y_pilots[i][scs] / vals[:, None]          # (len(scs), B)
            full = _interp_columns(scs.astype(float), est, np.arange(w, dtype=float))
            per_user_slots.setdefault(user, []).append((slot.symbol, full))
    t_data = cfg.data_symbol_indices.astype(float)
    h_hat = np.empty((w, cfg.n_data_symbols, b, u), dtype=np.complex128)
    for user in range(u):
        slots = sorted(per_user_slots.get(user, []))
        if not slots:
            raise ConfigurationError(f"user {user} has no pilot slots")
        times = np.array([t for t, _ in slots], dtype=float)
        stack = np.stack([s for _, s in slots])             # (S, W, B)
        interp = _interp_columns(times, stack, t_data)      # (T_D, W, B)
        h_hat[:, :, :, user] = np.moveaxis(interp, 0, 1)
    # data-RE order v = t_d * W + w
    h_hat = np.moveaxis(h_hat, 1, 0).reshape(cfg.n_res, b, u)
    return h_hat, float(n0)  # unit-energy pilots: one estimate per pilot RE


# ---------------------------------------------------------------------------
# channel dump file format

def save_channel_dump(path, h: np.ndarray, normalize: bool = True) -> None:
    """Write frames of shape (frames, T, W, B, U) as complex64.

    Layout: 16-byte magic, little-endian uint32 JSON-header length, JSON
    header, then the row-major complex64 payload ordered [frame][t][w][b][u].
    """
    h = np.asarray(h)
    if h.ndim != 5:
        raise InputError(f"expected (frames, T, W, B, U) tensor, got {h.shape}")
    frames, t, w, b, u = h.shape
    if normalize:
        energy = np.mean(np.abs(h) ** 2, axis=(1, 2, 3, 4), keepdims=True)
        h = h / np.sqrt(energy)
    header = {"frames": frames, "B": b, "U": u, "W": w, "T": t,
              "dtype": "c64", "normalized": bool(normalize)}
    blob = json.dumps(header).encode()
    with open(path, "wb") as f:
        f.write(DUMP_MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        f.write(np.ascontiguousarray(h.astype(np.complex64)).tobytes())


def load_channel_dump(path, expect: Optional[FrameConfig] = None) -> np.ndarray:
    """Load a channel dump; frames come back normalized to unit average
    energy per RE.  Raises InputError on any malformed or truncated file."""
    with open(path, "rb") as f:
        magic = f.read(len(DUMP_MAGIC))
        if magic != DUMP_MAGIC:
            raise InputError("bad channel dump magic")
        raw_len = f.read(4)
        if len(raw_len) != 4:
            raise InputError("truncated channel dump header")
        (hlen,) = struct.unpack("<I", raw_len)
        blob = f.read(hlen)
        if len(blob) != hlen:
            raise InputError("truncated channel dump header")
        try:
            header = json.loads(blob.decode())
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise InputError(f"malformed channel dump header: {e}") from e
        for key in ("frames", "B", "U", "W", "T", "dtype"):
            if key not in header:
                raise InputError(f"channel dump header missing {key!r}")
        if header["dtype"] != "c64":
            raise InputError(f"unsupported dump dtype {header['dtype']!r}")
        shape = (header["frames"], header["T"], header["W"],
                 header["B"], header["U"])
        count = int(np.prod(shape))
        payload = f.read(count * 8 + 1)
        if len(payload) != count * 8:
            raise InputError("channel dump payload size mismatch")
    if expect is not None:
        if (header["B"], header["U"], header["W"], header["T"]) != (
                expect.bs_antennas, expect.users, expect.subcarriers,
                expect.symbols):
            raise InputError(
                f"channel dump dims {shape[1:]} do not match frame config")
    h = np.frombuffer(payload, dtype=np.complex64).reshape(shape)
    h = h.astype(np.complex128)
    if not header.get("normalized", False):
        energy = np.mean(np.abs(h) ** 2, axis=(1, 2, 3, 4), keepdims=True)
        if np.any(energy == 0):
            raise InputError("channel dump contains an all-zero frame")
        h = h / np.sqrt(energy)
    return h
