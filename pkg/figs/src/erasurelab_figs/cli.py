"""render_figs <figure-id> --in <csv> --out <path> [--dump-json <path>]"""

from __future__ import annotations

import argparse
import sys

from .render import (FIGURE_IDS, EmptyInputError, FigureSpec, SchemaError,
                     extract_to_json, render)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(prog="render_figs")
    ap.add_argument("figure_id", choices=FIGURE_IDS)
    ap.add_argument("--in", dest="input_csv", required=True)
    ap.add_argument("--out", dest="output_path", required=True)
    ap.add_argument("--dump-json", dest="dump_json", default=None,
                    help="also write the extracted plot data as JSON")
    args = ap.parse_args(argv)
    spec = FigureSpec(args.figure_id, args.input_csv, args.output_path)
    try:
        if args.dump_json:
            with open(args.dump_json, "w") as fh:
                fh.write(extract_to_json(spec) + "\n")
        render(spec)
    except (SchemaError, EmptyInputError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        sys.exit(1)
    sys.exit(0)


if __name__ == "__main__":
    main()
