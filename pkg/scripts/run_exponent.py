"""Monte Carlo typicality exponent against the analytic divergence.

Usage: python scripts/run_exponent.py [--seed S] [--workers W] [--out DIR] [extra key=value ...]
"""

import argparse
import sys

from nestlat.harness import parse_config, run, write_outputs


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="results/exponent")
    ap.add_argument("overrides", nargs="*", help="extra config lines such as n=6,9 or trials=500")
    args = ap.parse_args(argv)
    text = "mode = exponent\ninstance = binary-exponent-d1\n" + "\n".join(args.overrides) + "\n"
    result = run(parse_config(text, {"seed": args.seed, "workers": args.workers}))
    for path in write_outputs(result, args.out):
        print(path)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
