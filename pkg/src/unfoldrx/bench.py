"""Monte-Carlo BLER/BER sweeps, complexity reports, and config-driven runs."""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import numkit, pipeline, simulate, train
from .constellation import qam16
from .detect import (loco_filters, loco_pic_stage, mmse_pic_stage, prepare)
from .errors import InputError
from .ldpc import LdpcCode
from .phy import FrameConfig
from .pipeline import HyperParamSet, classical_init

CSV_COLUMNS = ("snr_db", "frames", "blk_err", "bler", "bler_lo", "bler_hi",
               "ber", "mults_per_frame", "pipeline_id", "seed")
COUNTING_CONVENTION = ("one complex*complex = 4 real mults, complex*real = 2, "
                       "real*real = 1; divisions priced as multiplications; "
                       "additions and table lookups are free")
EBN0_CONVENTION = ("Eb/N0 per information bit: N0 = 1 / (R * Q * 10^(dB/10)), "
                   "pilot overhead excluded")
VERSION = "unfoldrx-1.0"

DEFAULT_TARGET_ERRORS = 200
DEFAULT_CHUNK = 40


# ---------------------------------------------------------------------------
# statistics

def wilson_interval(errors: int, trials: int, z: float = 1.959963984540054):
    """Wilson 95% score interval for a binomial proportion."""
    if trials <= 0:
        return 0.0, 1.0
    p = errors / trials
    zz = z * z / trials
    center = (p + zz / 2.0) / (1.0 + zz)
    half = (z / (1.0 + zz)) * math.sqrt(p * (1.0 - p) / trials + zz / (4.0 * trials))
    lo = 0.0 if errors == 0 else max(0.0, center - half)
    hi = 1.0 if errors == trials else min(1.0, center + half)
    return lo, hi


# ---------------------------------------------------------------------------
# sweeps

@dataclass
class SweepPoint:
    snr_db: float
    frames: int
    blk_err: int
    bler: float
    bler_lo: float
    bler_hi: float
    ber: float
    mults_per_frame: float


@dataclass
class SweepResult:
    pipeline_id: str
    seed: int
    points: list = field(default_factory=list)

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(CSV_COLUMNS)
            for p in self.points:
                w.writerow([_fmt(p.snr_db), p.frames, p.blk_err, _fmt(p.bler),
                            _fmt(p.bler_lo), _fmt(p.bler_hi), _fmt(p.ber),
                            _fmt(p.mults_per_frame), self.pipeline_id, self.seed])


def _fmt(x: float) -> str:
    return format(float(x), ".10g")


def _eval_chunk(cfg: FrameConfig, code: LdpcCode, params: HyperParamSet,
                snr_db: float, seed: int, frame_indices: np.ndarray):
    """Score one ordered chunk of frames; returns (frames, blk, bit, mults)."""
    batch = simulate.gen_frames(cfg, np.full(len(frame_indices), snr_db),
                                seed=seed, frame_indices=frame_indices)
    def run():
        return pipeline.run_receiver(cfg, code, batch.h_eff, batch.y, params)
    res, mults = numkit.counted_scope(run)
    errs = res.data_bits != batch.data_bits          # (F, U, D)
    blk = int(np.count_nonzero(errs.any(axis=-1)))
    bit = int(np.count_nonzero(errs))
    return len(frame_indices), blk, bit, mults


def sweep(cfg: FrameConfig, code: LdpcCode, params: HyperParamSet,
          snrs_db: Sequence[float], frames_per_point: int, seed: int,
          pipeline_id: str = "receiver", early_stop: bool = True,
          target_errors: int = DEFAULT_TARGET_ERRORS,
          chunk: int = DEFAULT_CHUNK, threads: int = 1,
          log=None) -> SweepResult:
    """BLER/BER sweep with per-frame derived seeds.

    Chunks are merged in frame-index order and the early-stop rule is applied
    to the ordered cumulative counts, so the result is identical for any
    thread count.  A block is one user's codeword.
    """
    result = SweepResult(pipeline_id=pipeline_id, seed=seed)
    n_users = cfg.users
    say = log if log is not None else (lambda s: None)
    for pt, snr in enumerate(snrs_db):
        base = pt * frames_per_point
        starts = list(range(0, frames_per_point, chunk))
        jobs = [np.arange(base + a, base + min(a + chunk, frames_per_point))
                for a in starts]

        outs = []
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                futs = [pool.submit(_eval_chunk, cfg, code, params, snr, seed, j)
                        for j in jobs]
                for fut in futs:
                    outs.append(fut.result())
        else:
            stop_at = None
            acc = 0
            for j in jobs:
                outs.append(_eval_chunk(cfg, code, params, snr, seed, j))
                acc += outs[-1][1]
                if early_stop and acc >= target_errors:
                    break

        frames = blk = bit = 0
        mults = 0.0
        for n_f, n_blk, n_bit, n_m in outs:
            frames += n_f
            blk += n_blk
            bit += n_bit
            mults += n_m
            if early_stop and blk >= target_errors:
                break
        blocks = frames * n_users
        bits = blocks * len(code.data_positions)
        lo, hi = wilson_interval(blk, blocks)
        result.points.append(SweepPoint(
            snr_db=float(snr), frames=frames, blk_err=blk,
            bler=blk / blocks, bler_lo=lo, bler_hi=hi, ber=bit / bits,
            mults_per_frame=mults / frames))
        say(f"{pipeline_id} @ {snr:g} dB: {blk}/{blocks} blocks "
            f"({blk / blocks:.4g}) over {frames} frames")
    return result


# ---------------------------------------------------------------------------
# complexity

def _count_detector_block(detector: str, b: int, u: int, n_stages: int,
                          t_d: int) -> int:
    """Real mults for one coherent channel block of t_d data REs."""
    cons = qam16()
    rng = numkit.make_rng(1234, b, u, n_stages)
    h = (rng.normal(size=(1, 1, b, u)) + 1j * rng.normal(size=(1, 1, b, u)))
    y = (rng.normal(size=(1, 1, t_d, b)) + 1j * rng.normal(size=(1, 1, t_d, b)))
    llr_a = rng.normal(size=(1, 1, t_d, u, cons.bits_per_symbol))

    def run():
        prep = prepare(h, y)
        if detector == "loco-pic":
            filt = loco_filters(prep)
            loco_pic_stage(filt, cons, None, zeta=1.0)
            for _ in range(n_stages - 1):
                loco_pic_stage(filt, cons, llr_a, zeta=0.5)
        else:
            mmse_pic_stage(prep, cons, None)
            for _ in range(n_stages - 1):
                mmse_pic_stage(prep, cons, llr_a)
        return None

    _, mults = numkit.counted_scope(run)
    return mults


def complexity_report(b: int, u: int, w: int = 60, t_d: int = 10) -> dict:
    """Self-counted detector multiplications per coherent block and per grid.

    One coherent block is a single subcarrier over t_d data slots; the grid
    scales that by w subcarriers.  Rows cover the non-iterative LMMSE bound
    and both PIC detectors at 2 and 3 stages.
    """
    rows = []
    for detector, stages, label in (
            ("mmse-pic", 1, "lmmse_I1"),
            ("loco-pic", 2, "loco-pic_I2"),
            ("loco-pic", 3, "loco-pic_I3"),
            ("mmse-pic", 2, "mmse-pic_I2"),
            ("mmse-pic", 3, "mmse-pic_I3")):
        per_block = _count_detector_block(detector, b, u, stages, t_d)
        rows.append({"detector": detector, "stages": stages, "label": label,
                     "mults_per_block": per_block,
                     "mults_per_grid": per_block * w})
    return {"bs_antennas": b, "users": u, "subcarriers": w, "data_slots": t_d,
            "counting_convention": COUNTING_CONVENTION, "rows": rows}


# ---------------------------------------------------------------------------
# config runner

def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise InputError(f"config missing required field '{path}{key}'")
    return obj[key]


def load_config(path: str) -> dict:
    try:
        with open(path) as f:
            cfg = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise InputError("config root must be a JSON object")
    spec = _require(cfg, "spec", "")
    _require(spec, "detector", "spec.")
    _require(spec, "stages", "spec.")
    _require(spec, "inner_iters", "spec.")
    _require(cfg, "sweep", "")
    _require(cfg["sweep"], "snr_db", "sweep.")
    _require(cfg["sweep"], "frames", "sweep.")
    return cfg


def run_config(path: str, out_dir: Optional[str] = None,
               seed: Optional[int] = None, frames: Optional[int] = None,
               snrs_db: Optional[Sequence[float]] = None, threads: int = 1,
               early_stop: Optional[bool] = None, log=None) -> dict:
    """Execute a JSON experiment config: optional training, sweep, complexity.

    CLI-style keyword overrides take precedence over the file.  Returns the
    paths of the written artifacts.
    """
    cfg = load_config(path)
    say = log if log is not None else (lambda s: None)
    out_dir = out_dir or cfg.get("out_dir", ".")
    os.makedirs(out_dir, exist_ok=True)
    seed = cfg.get("seed", 0) if seed is None else seed

    scen = cfg.get("scenario", {})
    frame_cfg = simulate.default_config(bs_antennas=scen.get("bs_antennas", 4))
    code = simulate.load_bundled_code()
    spec = cfg["spec"]
    params = classical_init(spec["detector"], int(spec["stages"]),
                            [int(x) for x in spec["inner_iters"]])
    name = os.path.splitext(os.path.basename(path))[0]
    pipeline_id = cfg.get("pipeline_id", name)

    artifacts = {}
    tr = cfg.get("train")
    if tr:
        curve = os.path.join(out_dir, f"{name}_curve.csv")
        params = train.train(
            frame_cfg, code, params,
            batches=int(tr.get("batches", 2500)),
            batch_size=int(tr.get("batch_size", 40)),
            snr_range=tuple(tr.get("snr_range", (-5.0, 5.0))),
            lr_bce=float(tr.get("lr_bce", 1e-3)),
            lr_lse=float(tr.get("lr_lse", 1e-4)),
            seed=int(tr.get("seed", seed)),
            micro_batch=int(tr.get("micro_batch", 8)),
            curve_path=curve, log=say)
        artifacts["curve"] = curve

    params_path = os.path.join(out_dir, f"{name}_params.json")
    with open(params_path, "w") as f:
        f.write(params.to_json())
    artifacts["params"] = params_path

    sw = cfg["sweep"]
    stop = sw.get("early_stop", True) if early_stop is None else early_stop
    res = sweep(frame_cfg, code, params,
                snrs_db=list(snrs_db) if snrs_db is not None else list(sw["snr_db"]),
                frames_per_point=int(frames if frames is not None else sw["frames"]),
                seed=seed, pipeline_id=pipeline_id, early_stop=bool(stop),
                threads=threads, log=say)
    csv_path = os.path.join(out_dir, f"{name}_results.csv")
    res.to_csv(csv_path)
    artifacts["results"] = csv_path

    report = complexity_report(frame_cfg.bs_antennas, frame_cfg.users)
    meta = {"seed": seed, "version": VERSION,
            "counting_convention": COUNTING_CONVENTION,
            "snr_convention": EBN0_CONVENTION,
            "pipeline_id": pipeline_id,
            "complexity": report}
    meta_path = os.path.join(out_dir, f"{name}_metadata.json")
    with open(meta_path, "w") as f:
        json.dump(meta, f, indent=2)
    artifacts["metadata"] = meta_path
    return artifacts
