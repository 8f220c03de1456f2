"""`coseg-adapter` command line.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys

from .backends import AdapterError
from .jobs import (
    DEFAULT_FEATURE_MODEL,
    DEFAULT_FLOW_MODEL,
    DEFAULT_SALIENCY_SOURCES,
    run_features,
    run_flows,
    run_saliency,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coseg-adapter", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("saliency", help="emit per-source saliency map PNGs")
    p.add_argument("--images", required=True, help="directory of input images")
    p.add_argument("--out", required=True, help="output root; sources go to src0..srcN")
    p.add_argument(
        "--sources",
        default=",".join(DEFAULT_SALIENCY_SOURCES),
        help="comma-separated backend specs, one per source (order defines L)",
    )

    p = sub.add_parser("flows", help="emit .flo fields and a pair-manifest")
    p.add_argument("--images", required=True)
    p.add_argument("--pairs", required=True, help="required-pairs file (source target per line)")
    p.add_argument("--out", required=True, help="directory for .flo files and manifest.txt")
    p.add_argument("--model", default=DEFAULT_FLOW_MODEL, help="flow backend spec")

    p = sub.add_parser("features", help="emit a global feature file")
    p.add_argument("--images", required=True)
    p.add_argument("--out", required=True, help="feature file path")
    p.add_argument("--model", default=DEFAULT_FEATURE_MODEL, help="feature backend spec")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "saliency":
            dirs = run_saliency(args.images, args.out, args.sources.split(","))
            print("\n".join(dirs))
        elif args.command == "flows":
            print(run_flows(args.images, args.pairs, args.out, args.model))
        elif args.command == "features":
            print(run_features(args.images, args.out, args.model))
    except (AdapterError, OSError, ValueError) as e:
        print(f"coseg-adapter: error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
