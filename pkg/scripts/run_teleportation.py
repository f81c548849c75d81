#!/usr/bin/env python3
"""Teleportation with random and adaptive ancilla selection; writes the
per-mode success CSV plus the selection comparison JSON."""

import argparse
import sys

from erasurelab import cli


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out-dir", default="results/teleport")
    ap.add_argument("--shots", type=int, default=50000)
    ap.add_argument("--seed", type=int, default=9)
    ap.add_argument("--workers", type=int, default=8)
    args = ap.parse_args()
    rc = cli.cli_dispatch([
        "qec-teleport", "--compare", "--shots", str(args.shots),
        "--seed", str(args.seed), "--workers", str(args.workers),
        "--out-dir", args.out_dir])
    sys.exit(rc)


if __name__ == "__main__":
    main()
