"""Command line front end for container conversion.

Two subcommands share the same flags: ``convert`` writes the header and
payload pair, ``verify`` re-reads both sides and compares them.
"""

from __future__ import annotations

import argparse
import sys

from .core import ConversionError, ConversionSpec, convert, verify

from . import __version__


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hsi-convert",
        description="Convert MATLAB containers to the slcgc raw format.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, summary in (
        ("convert", "extract a variable and write header + payload"),
        ("verify", "compare a converted pair against its container"),
    ):
        p = sub.add_parser(name, help=summary)
        p.add_argument(
            "--in",
            dest="container",
            required=True,
            metavar="PATH",
            help="source .mat container",
        )
        p.add_argument(
            "--var",
            dest="variable",
            required=True,
            metavar="NAME",
            help="variable name inside the container",
        )
        p.add_argument(
            "--out",
            dest="out_base",
            required=True,
            metavar="BASE",
            help="output path without extension (.json/.raw are appended)",
        )
        p.add_argument(
            "--gt",
            dest="ground_truth",
            action="store_true",
            help="treat the variable as a 2-D label map instead of a cube",
        )
        p.add_argument(
            "--axes",
            choices=("auto", "keep", "reverse"),
            default="auto",
            help="axis order policy (auto reverses HDF5 containers)",
        )
    return parser


def _spec_from(args: argparse.Namespace) -> ConversionSpec:
    return ConversionSpec(
        container=args.container,
        variable=args.variable,
        out_base=args.out_base,
        ground_truth=args.ground_truth,
        axes=args.axes,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "convert":
            header, payload = convert(_spec_from(args))
            print(f"wrote {header} and {payload}")
        else:
            print(verify(_spec_from(args)).describe())
    except (ConversionError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
