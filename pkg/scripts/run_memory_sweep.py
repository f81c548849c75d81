#!/usr/bin/env python3
"""Memory experiment over the hold-time grid; writes the decoding-mode
success/acceptance CSV consumed by the figure scripts."""

import argparse
import sys

from erasurelab import cli


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out-dir", default="results/memory")
    ap.add_argument("--shots", type=int, default=100000)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--workers", type=int, default=8)
    args = ap.parse_args()
    import json
    import tempfile

    cfg = {"targets": ["ZZ", "XX"], "t_wait_grid": [0.0, 0.1, 0.2, 0.35, 0.5]}
    with tempfile.NamedTemporaryFile("w", suffix=".toml", delete=False) as fh:
        fh.write("targets = " + json.dumps(cfg["targets"]) + "\n")
        fh.write("t_wait_grid = " + json.dumps(cfg["t_wait_grid"]) + "\n")
        path = fh.name
    rc = cli.cli_dispatch([
        "qec-memory", "--config", path, "--shots", str(args.shots),
        "--seed", str(args.seed), "--workers", str(args.workers),
        "--out-dir", args.out_dir])
    sys.exit(rc)


if __name__ == "__main__":
    main()
