"""Command line entry point: plot waterfall|tradeoff --csv ... --out ..."""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .curves import InputError
from .figures import plot_tradeoff, plot_waterfall


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="plot", description="Generate figures from bench sweep CSVs")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("waterfall", help="BLER vs SNR curves")
    p.add_argument("--csv", nargs="+", required=True, help="sweep CSV paths")
    p.add_argument("--out", required=True, help="output image path")
    p.add_argument("--labels", nargs="+", default=None,
                   help="legend labels, one per CSV (default: pipeline_id)")

    p = sub.add_parser("tradeoff", help="complexity vs min SNR at target BLER")
    p.add_argument("--csv", nargs="+", required=True,
                   help="sweep CSV paths; the first is the baseline")
    p.add_argument("--out", required=True, help="output image path")
    p.add_argument("--labels", nargs="+", default=None)
    p.add_argument("--target", type=float, default=1e-2,
                   help="target BLER (default 1e-2)")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "waterfall":
            out = plot_waterfall(args.csv, args.out, labels=args.labels)
        else:
            out = plot_tradeoff(args.csv, args.out, target_bler=args.target,
                                labels=args.labels)
        print(f"wrote {out}")
        return 0
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
