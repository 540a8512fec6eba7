"""Command-line entry point: ``nestlat {verify,gp,wz,exponent,quantize}``."""

from __future__ import annotations

import argparse
import sys

from .harness import MODES, ConfigError, parse_config, run, write_outputs

DEFAULT_INSTANCE = {"gp": "gp-z3-flip01", "wz": "wz-z3-flip01", "exponent": "binary-exponent-d1",
                    "quantize": "gauss-rho08", "verify": ""}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nestlat", description="Nested lattice code experiments.")
    sub = ap.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        sp = sub.add_parser(mode)
        sp.add_argument("--config", help="key = value config file")
        sp.add_argument("--seed", type=int, help="master seed (default 0)")
        sp.add_argument("--trials", type=int, help="trials per sweep point (samples in exponent mode)")
        sp.add_argument("--out", help="output directory (default: print a summary only)")
        sp.add_argument("--workers", type=int, help="worker processes")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = ""
        if args.config:
            with open(args.config) as fh:
                text = fh.read()
        overrides = dict(seed=args.seed, out=args.out, workers=args.workers)
        if args.mode == "exponent":
            overrides["samples"] = args.trials
        else:
            overrides["trials"] = args.trials
        if "mode" not in _keys(text):
            text = f"mode = {args.mode}\n" + text
        if "instance" not in _keys(text) and DEFAULT_INSTANCE[args.mode]:
            text += f"\ninstance = {DEFAULT_INSTANCE[args.mode]}\n"
        cfg = parse_config(text, overrides)
        if cfg.mode != args.mode:
            raise ConfigError(f"config mode {cfg.mode!r} does not match subcommand {args.mode!r}", key="mode")
        result = run(cfg)
    except (ConfigError, OSError, KeyError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    if cfg.out:
        for path in write_outputs(result, cfg.out):
            print(path)
    else:
        names = sorted(result.files)
        primary = next((n for n in names if n.endswith(("_summary.csv", "_sweep.csv", "_reports.txt"))), names[0])
        sys.stdout.write(result.files[primary])
    return result.exit_code


def _keys(text: str) -> set:
    keys = set()
    for line in text.splitlines():
        line = line.split("#", 1)[0]
        if "=" in line:
            keys.add(line.split("=", 1)[0].strip())
    return keys


if __name__ == "__main__":
    sys.exit(main())
