"""Command-line interface: train, sweep, complexity, and config-driven runs."""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional, Sequence

from . import bench, simulate, train
from .errors import UnfoldrxError
from .pipeline import HyperParamSet, classical_init


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--seed", type=int, default=None, help="master seed")
    p.add_argument("--out", default=None, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="unfoldrx",
        description="Link-level MU-MIMO-OFDM receiver simulation toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train receiver hyperparameters")
    _add_common(p)

    p = sub.add_parser("sweep", help="Monte-Carlo BLER/BER sweep")
    _add_common(p)
    p.add_argument("--params", help="hyperparameter JSON (default: classical)")
    p.add_argument("--frames", type=int, default=None, help="frames per SNR point")
    p.add_argument("--snr", type=float, nargs="+", default=None,
                   help="SNR grid in dB")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--no-early-stop", action="store_true",
                   help="run the full frame count at every point")

    p = sub.add_parser("complexity", help="print the multiplication-count report")
    p.add_argument("--bs-antennas", type=int, default=4)
    p.add_argument("--users", type=int, default=4)
    p.add_argument("--out", default=None)

    p = sub.add_parser("run", help="execute a JSON experiment config end to end")
    _add_common(p)
    p.add_argument("--frames", type=int, default=None)
    p.add_argument("--snr", type=float, nargs="+", default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--no-early-stop", action="store_true")
    return ap


def bundled_config(name: str) -> str:
    """Path of a packaged experiment config such as rayleigh_4x4_duidd_I2."""
    from importlib import resources
    base = resources.files("unfoldrx.configs")
    return str(base / f"{name}.json")


def _resolve_config(arg: Optional[str]) -> str:
    if arg is None:
        raise UnfoldrxError("--config is required for this subcommand")
    if os.path.exists(arg):
        return arg
    candidate = bundled_config(arg)
    if os.path.exists(candidate):
        return candidate
    raise UnfoldrxError(f"config not found: {arg}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    log = print
    try:
        if args.command == "train":
            path = _resolve_config(args.config)
            cfg = bench.load_config(path)
            if not cfg.get("train"):
                raise UnfoldrxError("config has no 'train' section")
            out = args.out or cfg.get("out_dir", ".")
            os.makedirs(out, exist_ok=True)
            frame_cfg = simulate.default_config(
                bs_antennas=cfg.get("scenario", {}).get("bs_antennas", 4))
            code = simulate.load_bundled_code()
            spec = cfg["spec"]
            init = classical_init(spec["detector"], int(spec["stages"]),
                                  [int(x) for x in spec["inner_iters"]])
            tr = cfg["train"]
            seed = args.seed if args.seed is not None else int(tr.get("seed", cfg.get("seed", 0)))
            name = os.path.splitext(os.path.basename(path))[0]
            params = train.train(
                frame_cfg, code, init,
                batches=int(tr.get("batches", 2500)),
                batch_size=int(tr.get("batch_size", 40)),
                snr_range=tuple(tr.get("snr_range", (-5.0, 5.0))),
                lr_bce=float(tr.get("lr_bce", 1e-3)),
                lr_lse=float(tr.get("lr_lse", 1e-4)),
                seed=seed, micro_batch=int(tr.get("micro_batch", 8)),
                curve_path=os.path.join(out, f"{name}_curve.csv"), log=log)
            dest = os.path.join(out, f"{name}_params.json")
            with open(dest, "w") as f:
                f.write(params.to_json())
            log(f"wrote {dest}")
        elif args.command == "sweep":
            path = _resolve_config(args.config)
            cfg = bench.load_config(path)
            out = args.out or cfg.get("out_dir", ".")
            os.makedirs(out, exist_ok=True)
            frame_cfg = simulate.default_config(
                bs_antennas=cfg.get("scenario", {}).get("bs_antennas", 4))
            code = simulate.load_bundled_code()
            spec = cfg["spec"]
            if args.params:
                with open(args.params) as f:
                    params = HyperParamSet.from_json(f.read())
            else:
                params = classical_init(spec["detector"], int(spec["stages"]),
                                        [int(x) for x in spec["inner_iters"]])
            sw = cfg["sweep"]
            seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
            name = os.path.splitext(os.path.basename(path))[0]
            res = bench.sweep(
                frame_cfg, code, params,
                snrs_db=args.snr if args.snr is not None else list(sw["snr_db"]),
                frames_per_point=args.frames if args.frames is not None else int(sw["frames"]),
                seed=seed, pipeline_id=cfg.get("pipeline_id", name),
                early_stop=not args.no_early_stop and bool(sw.get("early_stop", True)),
                threads=args.threads, log=log)
            dest = os.path.join(out, f"{name}_results.csv")
            res.to_csv(dest)
            log(f"wrote {dest}")
        elif args.command == "complexity":
            report = bench.complexity_report(args.bs_antennas, args.users)
            text = json.dumps(report, indent=2)
            if args.out:
                with open(args.out, "w") as f:
                    f.write(text + "\n")
            else:
                print(text)
        elif args.command == "run":
            path = _resolve_config(args.config)
            artifacts = bench.run_config(
                path, out_dir=args.out, seed=args.seed, frames=args.frames,
                snrs_db=args.snr, threads=args.threads,
                early_stop=False if args.no_early_stop else None, log=log)
            for kind, dest in artifacts.items():
                log(f"{kind}: {dest}")
    except UnfoldrxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
