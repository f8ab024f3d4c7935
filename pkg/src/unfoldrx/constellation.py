"""Gray-labeled QAM constellations, bit mapping, and enumeration references.

Bit convention: label bit q of a point is ``labels[i, q]``; LLRs are
``log P[b=1] / P[b=0]``.  For the bundled square constellations the label
structure is separable per axis: bit 0 is the I sign, bit 1 the Q sign and,
for 16-QAM, bits 2/3 select the I/Q magnitude (0 -> inner level).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class Constellation:
    name: str
    bits_per_symbol: int
    points: np.ndarray          # (2**Q,) complex128, unit average energy
    labels: np.ndarray          # (2**Q, Q) uint8
    gray_square: bool = False
    axis_scale2: float = 0.0    # per-axis power normalization a**2
    bit0_sets: np.ndarray = field(default=None, repr=False)  # (Q, 2**(Q-1))
    bit1_sets: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        q = self.bits_per_symbol
        if self.points.shape != (2**q,) or self.labels.shape != (2**q, q):
            raise ConfigurationError("constellation table sizes inconsistent")
        energy = np.mean(np.abs(self.points) ** 2)
        if abs(energy - 1.0) > 1e-12:
            raise ConfigurationError(
                f"constellation average energy {energy} is not 1")
        if len({tuple(l) for l in self.labels}) != 2**q:
            raise ConfigurationError("constellation labels are not unique")
        b0 = np.stack([np.where(self.labels[:, i] == 0)[0] for i in range(q)])
        b1 = np.stack([np.where(self.labels[:, i] == 1)[0] for i in range(q)])
        object.__setattr__(self, "bit0_sets", b0)
        object.__setattr__(self, "bit1_sets", b1)

    @property
    def axis_scale(self) -> float:
        return float(np.sqrt(self.axis_scale2))

    # -- mapping ------------------------------------------------------------

    def map_bits(self, bits: np.ndarray) -> np.ndarray:
        """Map (..., Q) bits to symbols; bit 0 is the most significant."""
        q = self.bits_per_symbol
        bits = np.asarray(bits)
        if bits.shape[-1] != q:
            raise ConfigurationError(
                f"need {q} bits per symbol, got trailing dim {bits.shape[-1]}")
        weights = 1 << np.arange(q - 1, -1, -1)
        idx = (bits.astype(np.int64) * weights).sum(axis=-1)
        return self.points[idx]

    def nearest_labels(self, symbols: np.ndarray) -> np.ndarray:
        """Hard demap to the label bits of the nearest point."""
        d = np.abs(np.asarray(symbols)[..., None] - self.points) ** 2
        return self.labels[np.argmin(d, axis=-1)]

    # -- enumeration references (test oracles, arbitrary labelings) ---------

    def soft_symbols_ref(self, llr: np.ndarray):
        """A-priori soft symbols and variances by full point enumeration."""
        llr = np.asarray(llr, dtype=float)
        signs = 2.0 * self.labels - 1.0                      # (2**Q, Q)
        logits = llr[..., None, :] * signs                   # (..., 2**Q, Q)
        with np.errstate(over="ignore"):
            prob = np.prod(1.0 / (1.0 + np.exp(-logits)), axis=-1)
        prob = prob / prob.sum(axis=-1, keepdims=True)
        s_hat = (prob * self.points).sum(axis=-1)
        var = (prob * np.abs(self.points - s_hat[..., None]) ** 2).sum(axis=-1)
        return s_hat, var

    def maxlog_ref(self, s_hat: np.ndarray, nu2: np.ndarray) -> np.ndarray:
        """Max-log LLRs by full enumeration of both label subsets per bit."""
        s_hat = np.asarray(s_hat)
        d = np.abs(s_hat[..., None] - self.points) ** 2      # (..., 2**Q)
        d0 = np.min(d[..., self.bit0_sets], axis=-1)         # (..., Q)
        d1 = np.min(d[..., self.bit1_sets], axis=-1)
        return (d0 - d1) / np.asarray(nu2)[..., None]


def _labels(q: int) -> np.ndarray:
    idx = np.arange(2**q)
    return ((idx[:, None] >> np.arange(q - 1, -1, -1)) & 1).astype(np.uint8)


def qpsk() -> Constellation:
    labels = _labels(2)
    a2 = 1.0 / 2.0
    a = np.sqrt(a2)
    re = (1.0 - 2.0 * labels[:, 0]) * a
    im = (1.0 - 2.0 * labels[:, 1]) * a
    return Constellation("qpsk", 2, re + 1j * im, labels,
                         gray_square=True, axis_scale2=a2)


def qam16() -> Constellation:
    labels = _labels(4)
    a2 = 1.0 / 10.0
    a = np.sqrt(a2)
    re = (1.0 - 2.0 * labels[:, 0]) * (1.0 + 2.0 * labels[:, 2]) * a
    im = (1.0 - 2.0 * labels[:, 1]) * (1.0 + 2.0 * labels[:, 3]) * a
    return Constellation("qam16", 4, re + 1j * im, labels,
                         gray_square=True, axis_scale2=a2)


_BUILTIN = {"qpsk": qpsk, "qam16": qam16, "16qam": qam16}


def by_name(name: str) -> Constellation:
    try:
        return _BUILTIN[name.lower()]()
    except KeyError:
        raise ConfigurationError(f"unknown constellation {name!r}") from None
