"""Command-line entry point: ``cpsc-ris {ber,mse,bound,pep,rankscan}``."""

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from ._validation import CapacityError, ConfigurationError
from .config import SystemConfig


def parse_snr(text):
    """``min:step:max`` (inclusive) or a comma-separated list."""
    if ":" in text:
        lo, step, hi = (float(v) for v in text.split(":"))
        if step <= 0:
            raise argparse.ArgumentTypeError("SNR step must be positive")
        n = int(np.floor((hi - lo) / step + 1e-9)) + 1
        return tuple(round(lo + i * step, 10) for i in range(n))
    return tuple(float(v) for v in text.split(","))


def parse_pair(text):
    try:
        i, j = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("--pair expects two integers 'i,j'") from None
    return i, j


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML/JSON scenario file")
    common.add_argument("--seed", type=int, help="override master_seed")
    common.add_argument("--out", type=Path, help="output CSV (default: stdout)")
    common.add_argument("--snr", type=parse_snr, help="grid override, 'min:step:max' or 'a,b,c'")
    common.add_argument("--detectors", type=lambda s: tuple(s.split(",")), help="comma-separated detector list")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--min-trials", type=int, help="override min_trials")
    common.add_argument("--plot-script", type=Path, help="also write a gnuplot script for the CSV")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="cpsc-ris", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    ber = sub.add_parser("ber", parents=[common], help="Monte Carlo BER sweep")
    ber.add_argument("--wall-time", action="store_true", help="fill the wall_time_s column (breaks byte-reproducibility)")
    sub.add_parser("mse", parents=[common], help="channel-estimation MSE sweep (grid is 1/N0 in dB)")
    sub.add_parser("bound", parents=[common], help="analytic union bound on the ML BER")
    pep = sub.add_parser("pep", parents=[common], help="single-pair PEP with Monte Carlo cross-check")
    pep.add_argument("--pair", type=parse_pair, required=True, help="candidate indices 'i,j' in bit-word order")
    pep.add_argument("--draws", type=int, default=100_000, help="channel draws for the averaged PEP")
    sub.add_parser("rankscan", parents=[common], help="rank histogram of the error-event Gram matrices")
    return p


def load_config(args):
    cfg = SystemConfig.load(args.config) if args.config else SystemConfig()
    changes = {}
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if args.snr is not None:
        changes["snr_db"] = args.snr
    if args.detectors is not None:
        changes["detectors"] = args.detectors
    if args.min_trials is not None:
        changes["min_trials"] = args.min_trials
    return cfg.replace(**changes) if changes else cfg


def _emit(args, text):
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args)
        if args.threads < 1:
            raise ConfigurationError("--threads must be >= 1")
        if args.command == "ber":
            records = harness.run_ber_sweep(cfg, threads=args.threads, record_time=args.wall_time)
            text = harness.format_csv(harness.BER_HEADER, harness.ber_rows(records))
            series = [(f"{cfg.scheme} {d}", f'$2=="{d}"') for d in cfg.detectors]
        elif args.command == "mse":
            text = harness.format_csv(harness.MSE_HEADER, harness.run_mse_sweep(cfg, threads=args.threads))
            series = [("empirical", None)]
        elif args.command == "bound":
            rows = [(cfg.scheme, s, b) for s, b in harness.run_bound(cfg)]
            text = harness.format_csv(harness.BOUND_HEADER, rows)
            series = [(f"{cfg.scheme} bound", None)]
        elif args.command == "pep":
            text = harness.format_csv(harness.PEP_HEADER, harness.run_pep(cfg, args.pair, draws=args.draws))
            series = []
        else:
            spec, hist = harness.run_rankscan(cfg)
            text = harness.format_csv(harness.RANK_HEADER, hist)
            print(f"minimum rank: {spec.rank_min}", file=sys.stderr)
            series = []
    except (ConfigurationError, CapacityError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _emit(args, text)
    if args.out:
        harness.write_metadata(args.out.with_suffix(args.out.suffix + ".meta.json"), cfg, args.command)
    if args.plot_script and args.out and series:
        args.plot_script.write_text(harness.plot_script(args.command, args.out, series))
    return 0


if __name__ == "__main__":
    sys.exit(main())
