#!/usr/bin/env python3
"""Transport survival versus move duration for the zero-jerk and
minimum-jerk profiles, with and without acoustic lensing."""

import argparse
import sys

from erasurelab import cli


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out-dir", default="results/transport")
    ap.add_argument("--atoms", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args()
    rc = cli.cli_dispatch([
        "transport-sim", "--shots", str(args.atoms), "--seed", str(args.seed),
        "--out-dir", args.out_dir])
    sys.exit(rc)


if __name__ == "__main__":
    main()
