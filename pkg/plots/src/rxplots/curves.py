"""Bench CSV loading and threshold interpolation.

The consumed schema is the bench sweep CSV: one row per SNR point with
columns snr_db, frames, blk_err, bler, bler_lo, bler_hi, ber,
mults_per_frame, pipeline_id, seed.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import List, Sequence

REQUIRED_COLUMNS = ("snr_db", "frames", "blk_err", "bler", "bler_lo",
                    "bler_hi", "ber", "mults_per_frame", "pipeline_id",
                    "seed")


class InputError(ValueError):
    """Malformed CSV input or a request the data cannot answer."""


@dataclass
class CurveSet:
    """One labeled BLER-vs-SNR series from a single sweep CSV."""
    label: str
    snr_db: List[float] = field(default_factory=list)
    bler: List[float] = field(default_factory=list)
    bler_lo: List[float] = field(default_factory=list)
    bler_hi: List[float] = field(default_factory=list)
    mults_per_frame: List[float] = field(default_factory=list)

    def __post_init__(self):
        if any(b < 0.0 or b > 1.0 for b in self.bler):
            raise InputError(f"series {self.label!r} has BLER outside [0, 1]")
        order = sorted(range(len(self.snr_db)), key=lambda i: self.snr_db[i])
        for name in ("snr_db", "bler", "bler_lo", "bler_hi",
                     "mults_per_frame"):
            vals = getattr(self, name)
            setattr(self, name, [vals[i] for i in order])


def load_csv(path: str, label: str | None = None) -> CurveSet:
    try:
        with open(path, newline="") as f:
            rows = list(csv.DictReader(f))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise InputError(f"{path} has no data rows")
    missing = [c for c in REQUIRED_COLUMNS if c not in rows[0]]
    if missing:
        raise InputError(f"{path} is missing columns {missing}")
    try:
        curve = CurveSet(
            label=label if label is not None else rows[0]["pipeline_id"],
            snr_db=[float(r["snr_db"]) for r in rows],
            bler=[float(r["bler"]) for r in rows],
            bler_lo=[float(r["bler_lo"]) for r in rows],
            bler_hi=[float(r["bler_hi"]) for r in rows],
            mults_per_frame=[float(r["mults_per_frame"]) for r in rows])
    except ValueError as exc:
        raise InputError(f"{path} has a non-numeric field: {exc}") from exc
    return curve


def snr_at_bler(curve: CurveSet, target: float,
                floor: float = 1e-7) -> float:
    """SNR where the curve crosses ``target``, log-linear in (SNR, log BLER).

    The series should be monotone decreasing in BLER; if it is not, a
    warning is issued and the first crossing (in SNR order) is used.
    """
    if target <= 0.0:
        raise InputError("target BLER must be positive")
    ys = [math.log10(max(b, floor)) for b in curve.bler]
    if any(b > a for a, b in zip(ys, ys[1:])):
        warnings.warn(f"series {curve.label!r} is not monotone decreasing; "
                      "using the first crossing", stacklevel=2)
    ty = math.log10(target)
    for i in range(len(ys) - 1):
        if ys[i] >= ty >= ys[i + 1] and ys[i] > ys[i + 1]:
            frac = (ys[i] - ty) / (ys[i] - ys[i + 1])
            return curve.snr_db[i] + frac * (curve.snr_db[i + 1]
                                             - curve.snr_db[i])
    raise InputError(
        f"series {curve.label!r} does not bracket BLER {target:g} "
        f"(range {min(curve.bler):g}..{max(curve.bler):g})")


def load_all(paths: Sequence[str],
             labels: Sequence[str] | None = None) -> List[CurveSet]:
    if labels is not None and len(labels) != len(paths):
        raise InputError("one label per CSV is required")
    return [load_csv(p, labels[i] if labels else None)
            for i, p in enumerate(paths)]
