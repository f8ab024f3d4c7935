"""Loss functions, gradients, Adam, and the two-phase hyperparameter training loop."""

from __future__ import annotations

import csv
import datetime
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import fad, simulate
from .errors import TrainingError
from .ldpc import LdpcCode
from .numkit import make_rng
from .phy import FrameConfig
from .pipeline import HyperParamSet, run_receiver

PROB_CLAMP = 1e-7
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


# ---------------------------------------------------------------------------
# losses

def bce_loss(data_bits: np.ndarray, llr):
    """Elementwise binary cross entropy of sigmoid(llr) against data_bits.

    Probabilities are clamped to [PROB_CLAMP, 1 - PROB_CLAMP] so saturated
    LLRs keep the loss finite.  Returns an array shaped like ``llr``.
    """
    d = np.asarray(data_bits, dtype=float)
    if not fad.is_dual(llr):
        llr = np.asarray(llr, dtype=float)
    log_p1 = fad.log(fad.clip(fad.sigmoid(llr), PROB_CLAMP, 1.0))
    log_p0 = fad.log(fad.clip(fad.sigmoid(-llr), PROB_CLAMP, 1.0))
    return -(d * log_p1 + (1.0 - d) * log_p0)


def lse_loss(data_bits: np.ndarray, llr):
    """Per-block log(sum_k exp(l_bce_k) - D + 1), averaged over blocks.

    ``llr`` has shape (..., D) with one block per leading index.  Each
    elementwise BCE term is >= 0, so the argument of the log is >= exp(max l)
    and the result is a sharp, always-nonnegative upper envelope of the worst
    bit in the block.  Overflow is avoided by max-subtraction.
    """
    l = bce_loss(data_bits, llr)
    d_count = np.shape(fad.val(l))[-1]
    m = -fad.min_last(-l)                              # per-block max, (...,)
    shifted = fad.exp(l - _expand(m, fad.val(l)))
    arg = fad.summ(shifted, axis=-1) - (d_count - 1.0) * fad.exp(-m)
    return fad.mean(m + fad.log(arg))


def _expand(x, like):
    """Append a broadcast axis so x lines up against like's last axis."""
    shape = np.shape(fad.val(x)) + (1,)
    return x.reshape(shape) if fad.is_dual(x) else np.reshape(x, shape)


# ---------------------------------------------------------------------------
# gradients

def grad(params: HyperParamSet, loss_fn: Callable) -> tuple[float, np.ndarray]:
    """Forward-mode gradient of a deterministic scalar loss of the params.

    ``loss_fn`` maps a HyperParamSet (possibly dual-valued) to a scalar.  All
    batch randomness must be frozen inside ``loss_fn`` so the loss depends on
    the parameters only.
    """
    vec = params.to_vector()
    loss = loss_fn(params.with_vector(fad.seed_params(vec)))
    value = float(np.asarray(fad.val(loss)).reshape(-1)[0])
    g = np.asarray(fad.val(loss.tan), dtype=float).reshape(len(vec)) \
        if fad.is_dual(loss) else np.zeros(len(vec))
    if not np.isfinite(value) or not np.all(np.isfinite(g)):
        raise TrainingError(f"non-finite loss or gradient (loss={value})")
    return value, g


def fd_grad(params: HyperParamSet, loss_fn: Callable, h: float = 1e-4) -> np.ndarray:
    """Central-difference gradient oracle over the full parameter vector."""
    vec = params.to_vector()
    out = np.zeros(len(vec))
    for k in range(len(vec)):
        vp, vm = vec.copy(), vec.copy()
        vp[k] += h
        vm[k] -= h
        lp = float(np.asarray(fad.val(loss_fn(params.with_vector(vp)))).reshape(-1)[0])
        lm = float(np.asarray(fad.val(loss_fn(params.with_vector(vm)))).reshape(-1)[0])
        out[k] = (lp - lm) / (2.0 * h)
    return out


# ---------------------------------------------------------------------------
# optimizer

@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(m=np.zeros(n), v=np.zeros(n), t=0)


def adam_step(state: AdamState, theta: np.ndarray, g: np.ndarray,
              lr: float) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update."""
    t = state.t + 1
    m = ADAM_BETA1 * state.m + (1.0 - ADAM_BETA1) * g
    v = ADAM_BETA2 * state.v + (1.0 - ADAM_BETA2) * g * g
    m_hat = m / (1.0 - ADAM_BETA1 ** t)
    v_hat = v / (1.0 - ADAM_BETA2 ** t)
    theta = theta - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    return theta, AdamState(m=m, v=v, t=t)


# ---------------------------------------------------------------------------
# batch construction

VALIDATION_OFFSET = 10 ** 6   # frame-index offset keeping val frames unseen


def _batch_loss_fn(cfg: FrameConfig, code: LdpcCode, batch: simulate.FrameBatch,
                   phase: str, micro_batch: int) -> Callable:
    """Freeze one batch and return params -> scalar loss over its data bits."""
    n_frames = batch.h_eff.shape[0]
    chunks = [np.arange(a, min(a + micro_batch, n_frames))
              for a in range(0, n_frames, micro_batch)]

    def loss_fn(params):
        total = 0.0
        for idx in chunks:
            res = run_receiver(cfg, code, batch.h_eff[idx], batch.y[idx], params)
            llr_d = fad.take_last(res.llr, code.data_positions)
            bits_d = batch.data_bits[idx]
            if phase == "bce":
                part = fad.mean(bce_loss(bits_d, llr_d))
            else:
                part = lse_loss(bits_d, llr_d)
            total = total + part * (len(idx) / n_frames)
        return total

    return loss_fn


def _draw_batch(cfg: FrameConfig, seed: int, batch_index: int, batch_size: int,
                snr_range: tuple[float, float],
                index_offset: int = 0) -> simulate.FrameBatch:
    rng = make_rng(seed, 1, batch_index)
    snrs = rng.uniform(snr_range[0], snr_range[1], size=batch_size)
    frame_indices = index_offset + batch_index * batch_size + np.arange(batch_size)
    return simulate.gen_frames(cfg, snrs, seed=seed, frame_indices=frame_indices)


# ---------------------------------------------------------------------------
# training loop

def train(cfg: FrameConfig, code: LdpcCode, init: HyperParamSet,
          batches: int = 2500, batch_size: int = 40,
          snr_range: tuple[float, float] = (-5.0, 5.0),
          lr_bce: float = 1e-3, lr_lse: float = 1e-4,
          seed: int = 0, micro_batch: int = 8, val_every: int = 25,
          val_size: Optional[int] = None, curve_path: Optional[str] = None,
          log: Optional[Callable[[str], None]] = None) -> HyperParamSet:
    """Two-phase training: BCE refinement then block-error (LSE) refinement.

    ``batches`` counts optimizer steps per phase.  Every batch freezes its own
    frames, noise, and SNR draws, so each step differentiates a deterministic
    loss.  Returns the final parameters unless validation regressed, in which
    case the best-seen checkpoint is returned with a warning.
    """
    if batches < 0 or batch_size < 1:
        raise TrainingError("batches must be >= 0 and batch_size >= 1")
    theta = init.to_vector()
    params = init
    adam = AdamState.zeros(len(theta))
    say = log if log is not None else (lambda s: None)

    val_size = batch_size if val_size is None else val_size
    val_batch = _draw_batch(cfg, seed, 0, val_size, snr_range,
                            index_offset=VALIDATION_OFFSET)
    val_bce = _batch_loss_fn(cfg, code, val_batch, "bce", micro_batch)
    val_lse = _batch_loss_fn(cfg, code, val_batch, "lse", micro_batch)

    def validate(p):
        return float(fad.val(val_lse(p)))

    init_val = validate(params)
    best_val, best_theta = init_val, theta.copy()
    say(f"initial validation loss {init_val:.6f}")

    rows = []
    global_batch = 0
    try:
        for phase, lr in (("bce", lr_bce), ("lse", lr_lse)):
            for b in range(batches):
                batch = _draw_batch(cfg, seed, global_batch, batch_size, snr_range)
                loss_fn = _batch_loss_fn(cfg, code, batch, phase, micro_batch)
                loss, g = grad(params, loss_fn)
                theta, adam = adam_step(adam, theta, g, lr)
                params = params.with_vector(theta)
                val_loss = ""
                if val_every and (global_batch + 1) % val_every == 0:
                    v = validate(params)
                    val_loss = f"{v:.8f}"
                    if v < best_val:
                        best_val, best_theta = v, theta.copy()
                    say(f"phase {phase} batch {b + 1}/{batches} "
                        f"loss {loss:.5f} val {v:.5f}")
                rows.append((phase, global_batch + 1, f"{loss:.8f}", val_loss,
                             f"{lr:g}"))
                global_batch += 1
    except TrainingError as exc:
        _write_curve(curve_path, rows)
        raise TrainingError(
            f"{exc} at batch {global_batch + 1}; last stable checkpoint has "
            f"validation loss {best_val:.6f}") from exc

    final_val = validate(params)
    if final_val < best_val:
        best_val, best_theta = final_val, theta.copy()
    elif best_val < final_val:
        say(f"validation loss at the end ({final_val:.6f}) is above the best "
            f"checkpoint ({best_val:.6f}); returning the best one")
        theta = best_theta
        params = params.with_vector(theta)
    if best_val > init_val:
        say(f"warning: training never improved validation ({init_val:.6f} -> "
            f"{best_val:.6f})")
    _write_curve(curve_path, rows)

    stamp = datetime.datetime.now(datetime.timezone.utc).isoformat()
    return replace(params, trained_at=stamp, seed=seed)


def _write_curve(path: Optional[str], rows: Sequence[tuple]) -> None:
    if path is None:
        return
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["phase", "batch", "loss", "val_loss", "lr"])
        w.writerows(rows)
