"""Command-line entry: svcache-plots FIGURE_ID --out FILE [inputs...]."""

from __future__ import annotations

import argparse
import sys

from .figures import FIGURE_IDS, FigureInputError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="svcache-plots",
        description="Render figures from svcache sweep outputs")
    parser.add_argument("figure_id", choices=FIGURE_IDS)
    parser.add_argument("--out", required=True, help="output SVG path")
    parser.add_argument("--reports", help="reports CSV (fixed header)")
    parser.add_argument("--csv", help="displacement or overlap-alpha CSV")
    parser.add_argument("--catalog", help="catalog table for the pareto figure")
    parser.add_argument("--series", nargs="+",
                        help="length=reports.csv pairs for the mflen figure")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        out = render(args.figure_id, args.out, reports=args.reports,
                     csv_path=args.csv, catalog=args.catalog,
                     series=args.series)
    except FigureInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
