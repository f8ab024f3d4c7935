"""SISO data detectors: LMMSE, MMSE-PIC, and the low-complexity PIC.

All detectors work on the whitened per-RE model ``y = H s + n`` with
``n ~ CN(0, I)``.  Channels are constant over the T data REs of a coherent
block, so the Gram matrix and all channel-only filters are computed once per
block and reused across REs and receiver stages.

The MMSE-PIC system matrix ``A = G diag(v) + I`` needs one LU-based inverse
per RE; the bias terms come from the diagonal identity
``diag(A^{-1} G) = (1 - diag(A^{-1})) / v``.  With zero priors (v = 1, soft
symbols 0) ``A`` collapses to the Hermitian ``G + I`` shared by all REs of
the block, which makes the first-stage MMSE-PIC, the LMMSE detector and the
low-complexity PIC with blend weight 1 produce identical outputs down to the
last bit.

Real-multiplication counting follows the convention in :mod:`unfoldrx.numkit`
(transcendentals, additions and power-of-two scalings are free; divisions are
priced as multiplications) and mirrors what each step actually computes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import fad, numkit
from .constellation import Constellation
from .errors import ConfigurationError

LLR_CLIP = 20.0
VAR_FLOOR = 1e-6


# ---------------------------------------------------------------------------
# containers

@dataclass
class ChannelPrep:
    """Per-coherent-block channel quantities shared by every stage."""
    h: np.ndarray        # (..., B, U)
    gram: np.ndarray     # (..., U, U)
    y_mf: np.ndarray     # (..., T, U) matched-filter outputs


@dataclass
class LocoFilters:
    """Channel-only filters of the low-complexity PIC, built once per block."""
    prep: ChannelPrep
    minv: np.ndarray      # (..., U, U) inverse of G + I
    mu_lm: np.ndarray     # (..., U) LMMSE bias
    nu2_lm: np.ndarray    # (..., U) LMMSE post-equalization variance
    g_diag: np.ndarray    # (..., U) real diagonal of G
    inv_g_diag: np.ndarray
    w_mf: np.ndarray      # (..., U, U) |G_uu'|^2 / G_uu^2, zero diagonal


@dataclass
class DetectorOut:
    llr_e: object         # (..., T, U, Q) extrinsic LLRs
    s_eq: object          # (..., T, U) equalized symbols
    nu2: object           # (..., T, U) post-equalization variances


def _batch(shape) -> int:
    return int(np.prod(shape, dtype=np.int64)) if len(shape) else 1


# ---------------------------------------------------------------------------
# channel preparation

def prepare(h: np.ndarray, y: np.ndarray, use_symmetry: bool = True) -> ChannelPrep:
    """Gram matrix and matched-filter outputs for a block of T REs.

    ``h`` is (..., B, U), ``y`` is (..., T, B).
    """
    h = np.asarray(h)
    y = np.asarray(y)
    b, u = h.shape[-2:]
    if y.shape[-1] != b or y.shape[:-2] != h.shape[:-2]:
        raise ConfigurationError(
            f"shape mismatch between h {h.shape} and y {y.shape}")
    g = numkit.gram(h, use_symmetry=use_symmetry)
    t = y.shape[-2]
    numkit.add_mults(_batch(h.shape[:-2]) * t * numkit.CC * b * u)
    y_mf = y @ np.conj(h)
    return ChannelPrep(h=h, gram=g, y_mf=y_mf)


# ---------------------------------------------------------------------------
# soft symbols

def soft_symbols(cons: Constellation, llr_a):
    """A-priori soft symbols and variances from LLRs (..., U, Q).

    Fast closed form for the separable Gray constellations; enumeration
    otherwise.  Both paths credit the multiplications they perform.
    """
    shape = np.shape(fad.val(llr_a))
    if shape[-1] != cons.bits_per_symbol:
        raise ConfigurationError("LLR trailing dim != bits per symbol")
    n = _batch(shape[:-1])
    a = cons.axis_scale
    if cons.gray_square and cons.bits_per_symbol == 2:
        t0 = fad.tanh(llr_a[..., 0] * 0.5)
        t1 = fad.tanh(llr_a[..., 1] * 0.5)
        s = (-a) * t0 + 1j * ((-a) * t1)
        nu2 = 1.0 - fad.abs2(s)
        numkit.add_mults(n * 4)
        return s, nu2
    if cons.gray_square and cons.bits_per_symbol == 4:
        t = [fad.tanh(llr_a[..., q] * 0.5) for q in range(4)]
        ei = (-a) * (t[0] * (2.0 + t[2]))
        eq = (-a) * (t[1] * (2.0 + t[3]))
        # E[x^2] per axis: a^2 (1 + 8 p_mag), p_mag = (1 + t)/2
        p2 = (1.0 + t[2]) * 0.5
        p3 = (1.0 + t[3]) * 0.5
        e2 = cons.axis_scale2 * (1.0 + 8.0 * p2) \
            + cons.axis_scale2 * (1.0 + 8.0 * p3)
        s = ei + 1j * eq
        nu2 = e2 - fad.abs2(s)
        numkit.add_mults(n * 8)
        return s, nu2
    # generic enumeration (matches the reference formulas)
    q = cons.bits_per_symbol
    m = 2 ** q
    signs = 2.0 * cons.labels - 1.0
    prob = None
    for i in range(q):
        f = fad.sigmoid(llr_a[..., None, i] * signs[None, :, i])
        prob = f if prob is None else prob * f
    prob = prob / fad.summ(prob, axis=-1)[..., None] if fad.is_dual(prob) \
        else prob / np.sum(prob, axis=-1, keepdims=True)
    s = fad.summ(prob * cons.points, axis=-1)
    e2 = fad.summ(prob * np.abs(cons.points) ** 2, axis=-1)
    nu2 = e2 - fad.abs2(s)
    numkit.add_mults(n * ((q - 1) * m + m + numkit.CR * m + m + 2))
    return s, nu2


# ---------------------------------------------------------------------------
# max-log demapping

def maxlog_demap(cons: Constellation, s_eq, nu2):
    """Extrinsic max-log LLRs of the equalized symbols, clipped to +-20."""
    n = _batch(np.shape(fad.val(s_eq)))
    r = fad.reciprocal(nu2)
    if cons.gray_square:
        a = cons.axis_scale
        a2 = cons.axis_scale2
        llrs = []
        for axis_val in (fad.real(s_eq), fad.imag(s_eq)):
            ax = a * axis_val
            if cons.bits_per_symbol == 2:
                llrs.append(((-4.0) * ax, None))
            else:
                axv = np.asarray(fad.val(ax))
                hi = axv > 2.0 * a2      # x > 2a  <=>  a x > 2 a^2
                lo = axv < -2.0 * a2
                n_sign = fad.where(hi, (-8.0) * (ax - a2),
                                   fad.where(lo, (-8.0) * (ax + a2),
                                             (-4.0) * ax))
                n_mag = 4.0 * (fad.absolute(ax) - 2.0 * a2)
                llrs.append((n_sign, n_mag))
        cols = [llrs[0][0] * r, llrs[1][0] * r]
        if cons.bits_per_symbol == 4:
            cols += [llrs[0][1] * r, llrs[1][1] * r]
        numkit.add_mults(n * (2 + 1 + len(cols)))
        out = fad.stack_last(cols)
    else:
        d = fad.abs2(s_eq[..., None] - cons.points)
        d0 = fad.stack_last([fad.min_last(fad.take_last(d, cons.bit0_sets[q]))
                             for q in range(cons.bits_per_symbol)])
        d1 = fad.stack_last([fad.min_last(fad.take_last(d, cons.bit1_sets[q]))
                             for q in range(cons.bits_per_symbol)])
        out = (d0 - d1) * r[..., None]
        m = 2 ** cons.bits_per_symbol
        numkit.add_mults(n * (2 * m + 1 + cons.bits_per_symbol))
    return fad.clip(out, -LLR_CLIP, LLR_CLIP)


# ---------------------------------------------------------------------------
# MMSE parallel interference cancellation

def mmse_pic_stage(prep: ChannelPrep, cons: Constellation,
                   llr_a=None) -> DetectorOut:
    """One MMSE-PIC pass over the block; ``llr_a`` is (..., T, U, Q) or None.

    With ``llr_a=None`` the priors are structurally zero and this is exactly
    the (soft-output) LMMSE detector.
    """
    g = prep.gram
    u = g.shape[-1]
    t = prep.y_mf.shape[-2]
    nb = _batch(g.shape[:-2])
    first = llr_a is None
    if first:
        s_a = np.zeros(prep.y_mf.shape)
        nu2_a = np.ones(prep.y_mf.shape[:-1] + (u,))
        z = prep.y_mf
        a_sys = g[..., None, :, :] + np.eye(u)  # one Hermitian system per block
    else:
        s_a, nu2_a = soft_symbols(cons, llr_a)
        nu2_a = fad.maximum_const(nu2_a, VAR_FLOOR)
        z = prep.y_mf - fad.matmul(g[..., None, :, :], s_a[..., None])[..., 0]
        a_sys = g[..., None, :, :] * nu2_a[..., None, :] + np.eye(u)
        numkit.add_mults(nb * t * (numkit.CC * u * u            # G s_a
                                   + numkit.CR * u * u))        # column scale
    if first:
        inv_a = fad.inv(a_sys)
        numkit.add_mults(nb * numkit.hpd_inverse_mults(u))
        mu = 1.0 - fad.real(_diag(inv_a))
    else:
        inv_a = fad.inv(a_sys)
        numkit.add_mults(nb * t * numkit.lu_inverse_mults(u))
        # diag(A^-1 G) = (1 - diag(A^-1)) / v since G = (A - I) diag(v)^-1
        mu = (1.0 - fad.real(_diag(inv_a))) / nu2_a
        numkit.add_mults(nb * t * u)
    e = fad.matmul(inv_a, z[..., None])[..., 0]
    numkit.add_mults(nb * t * numkit.CC * u * u)
    s_eq = e / mu + s_a
    nu2 = fad.maximum_const(fad.reciprocal(mu) - nu2_a, VAR_FLOOR)
    numkit.add_mults(nb * t * (numkit.CR * u + u))
    llr_e = maxlog_demap(cons, s_eq, nu2)
    return DetectorOut(llr_e=llr_e, s_eq=s_eq, nu2=nu2)


def lmmse_detect(prep: ChannelPrep, cons: Constellation) -> DetectorOut:
    """Soft-output LMMSE detection (the zero-prior MMSE-PIC)."""
    return mmse_pic_stage(prep, cons, None)


def _diag(a):
    u = np.shape(fad.val(a))[-1]
    idx = np.arange(u)
    flat = a.reshape(np.shape(fad.val(a))[:-2] + (u * u,)) if fad.is_dual(a) \
        else a.reshape(a.shape[:-2] + (u * u,))
    return fad.take_last(flat, idx * u + idx)


# ---------------------------------------------------------------------------
# low-complexity PIC

def loco_filters(prep: ChannelPrep) -> LocoFilters:
    """Channel-only filter bank shared by every low-complexity PIC stage."""
    g = prep.gram
    u = g.shape[-1]
    nb = _batch(g.shape[:-2])
    minv = fad.inv(g + np.eye(u))
    numkit.add_mults(nb * numkit.hpd_inverse_mults(u))
    mu_lm = 1.0 - np.real(_diag(minv))
    nu2_lm = 1.0 / mu_lm - 1.0
    numkit.add_mults(nb * u)
    g_diag = np.real(_diag(g))
    inv_g_diag = 1.0 / g_diag
    abs_off = np.abs(g) ** 2
    w_mf = abs_off * (inv_g_diag ** 2)[..., :, None]
    idx = np.arange(u)
    w_mf[..., idx, idx] = 0.0
    # |G_uu'|^2 off-diagonals, squared diagonal reciprocals, the divisions
    numkit.add_mults(nb * (2 * u * (u - 1) + u + u * (u - 1) + u))
    return LocoFilters(prep=prep, minv=minv, mu_lm=mu_lm, nu2_lm=nu2_lm,
                       g_diag=g_diag, inv_g_diag=inv_g_diag, w_mf=w_mf)


def loco_pic_stage(filters: LocoFilters, cons: Constellation,
                   llr_a=None, zeta=1.0) -> DetectorOut:
    """One low-complexity PIC pass; ``zeta`` blends the LMMSE and
    matched-filter equalizers (1 = pure LMMSE).

    When ``zeta`` is exactly the constant 1 the LMMSE branch is used on its
    own, reproducing the soft-output LMMSE detector bit for bit.
    """
    prep = filters.prep
    g = prep.gram
    u = g.shape[-1]
    t = prep.y_mf.shape[-2]
    nb = _batch(g.shape[:-2])
    first = llr_a is None
    if first:
        s_a = np.zeros(prep.y_mf.shape)
        z = prep.y_mf
        nu2 = np.broadcast_to(filters.nu2_lm[..., None, :], prep.y_mf.shape)
    else:
        s_a, nu2_a = soft_symbols(cons, llr_a)
        nu2_a = fad.maximum_const(nu2_a, VAR_FLOOR)
        z = prep.y_mf - fad.matmul(g[..., None, :, :], s_a[..., None])[..., 0]
        numkit.add_mults(nb * t * numkit.CC * u * u)
        # matched-filter residual-interference variance
        nu2 = fad.matmul(filters.w_mf[..., None, :, :], nu2_a[..., None])[..., 0] \
            + filters.inv_g_diag[..., None, :]
        numkit.add_mults(nb * t * u * (u - 1))
    zeta_is_one = not fad.is_dual(zeta) and float(np.asarray(zeta)) == 1.0
    if zeta_is_one:
        e = fad.matmul(filters.minv[..., None, :, :], z[..., None])[..., 0]
        s_eq = e / filters.mu_lm[..., None, :] + s_a
        numkit.add_mults(nb * t * (numkit.CC * u * u + numkit.CR * u))
    else:
        # fold the blend into one per-block filter:
        # W = zeta diag(1/mu) Minv + (1 - zeta) diag(1/G_uu)
        row = zeta / filters.mu_lm
        w_eq = row[..., :, None] * filters.minv \
            + ((1.0 - zeta) * filters.inv_g_diag)[..., :, None] * np.eye(u)
        numkit.add_mults(nb * (u + numkit.CR * u * u + u))
        s_eq = fad.matmul(w_eq[..., None, :, :], z[..., None])[..., 0] + s_a
        numkit.add_mults(nb * t * numkit.CC * u * u)
    nu2 = fad.maximum_const(nu2, VAR_FLOOR)
    llr_e = maxlog_demap(cons, s_eq, nu2)
    return DetectorOut(llr_e=llr_e, s_eq=s_eq, nu2=nu2)
