"""Waterfall and complexity-tradeoff figures (headless, file output only)."""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .curves import CurveSet, InputError, load_all, snr_at_bler  # noqa: E402

PLOT_FLOOR = 1e-6


def plot_waterfall(csv_paths: Sequence[str], out_path: str,
                   labels: Sequence[str] | None = None) -> str:
    """BLER vs SNR, log BLER axis, Wilson interval shading per curve.

    Zero-BLER points are rendered at the 1e-6 plot floor with open markers.
    """
    curves = load_all(csv_paths, labels)
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for curve in curves:
        shown = [max(b, PLOT_FLOOR) for b in curve.bler]
        line, = ax.plot(curve.snr_db, shown, marker="o", label=curve.label)
        floored = [i for i, b in enumerate(curve.bler) if b < PLOT_FLOOR]
        if floored:
            ax.plot([curve.snr_db[i] for i in floored],
                    [PLOT_FLOOR] * len(floored), linestyle="none",
                    marker="o", markerfacecolor="white",
                    color=line.get_color())
        ax.fill_between(curve.snr_db,
                        [max(b, PLOT_FLOOR) for b in curve.bler_lo],
                        [max(b, PLOT_FLOOR) for b in curve.bler_hi],
                        color=line.get_color(), alpha=0.2, linewidth=0)
    ax.set_yscale("log")
    ax.set_ylim(bottom=PLOT_FLOOR)
    ax.set_xlabel("SNR [dB]")
    ax.set_ylabel("BLER")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def plot_tradeoff(csv_paths: Sequence[str], out_path: str,
                  target_bler: float = 1e-2,
                  labels: Sequence[str] | None = None) -> str:
    """Complexity vs minimum SNR reaching ``target_bler``.

    x is mults per frame normalized to the first series (the baseline, which
    therefore sits at x = 1.0); y is the SNR at the target BLER via
    log-linear interpolation.  A series that never brackets the target is an
    input error naming that series.
    """
    curves = load_all(csv_paths, labels)
    if not curves:
        raise InputError("at least one CSV is required")
    base = curves[0].mults_per_frame[0]
    if base <= 0:
        raise InputError(
            f"baseline series {curves[0].label!r} has no multiplication count")
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for curve in curves:
        x = curve.mults_per_frame[0] / base
        y = snr_at_bler(curve, target_bler)
        ax.plot([x], [y], marker="s", markersize=8, linestyle="none",
                label=curve.label)
        ax.annotate(curve.label, (x, y), textcoords="offset points",
                    xytext=(6, 4), fontsize=8)
    ax.set_xlabel("complexity (mults / frame, LMMSE I=1 baseline = 1.0)")
    ax.set_ylabel(f"min SNR [dB] for BLER {target_bler:g}")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path
