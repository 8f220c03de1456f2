"""`coseg` command line: run the pipeline end to end or stage by stage.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import ConfigurationError, FormatError
from .evaluate import load_dataset, report_lines, report_table, score
from .pipeline import (
    cluster_stage,
    fuse_stage,
    load_config,
    run_pipeline,
    segment_stage,
)
from .synthetic import gen_synthetic

_CONFIG_FLAGS = [
    ("--input-dir", str, "directory of input images"),
    ("--saliency-dirs", str, "comma-separated saliency source directories (order defines L)"),
    ("--flow-manifest", str, "pair-manifest of .flo files"),
    ("--features-file", str, "optional global feature file"),
    ("--output-dir", str, "where masks and stage outputs go"),
    ("--k-min", int, "smallest K to try"),
    ("--k-max", int, "largest K to try"),
    ("--gc-iters", int, "GrabCut iterations"),
    ("--gc-gamma", float, "GrabCut smoothness weight"),
    ("--gc-components", int, "GMM components per color model"),
    ("--seed", int, "master random seed"),
    ("--dump-fused", str, "also dump fused maps as 8-bit PNGs to this directory"),
]


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file; flags override its keys")
    for flag, typ, help_text in _CONFIG_FLAGS:
        p.add_argument(flag, type=typ, default=None, help=help_text)


def _config_from_args(args: argparse.Namespace):
    keys = [f[0].lstrip("-").replace("-", "_") for f in _CONFIG_FLAGS]
    overrides = {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}
    return load_config(args.config, overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coseg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in [
        ("run", "full pipeline: cluster, fuse, segment"),
        ("cluster", "grouping manifest and required flow pairs only"),
        ("fuse", "fused saliency maps only (needs cluster output)"),
        ("segment", "masks from fused maps (needs fuse output)"),
    ]:
        p = sub.add_parser(name, help=help_text)
        _add_config_args(p)

    p = sub.add_parser("evaluate", help="score predicted masks against a dataset")
    p.add_argument("--dataset", required=True, help="dataset root (class directories with GT/)")
    p.add_argument("--preds", required=True, help="directory of predicted mask PNGs")
    p.add_argument("--out", default=None, help="write machine-readable score lines here")

    p = sub.add_parser("gen-synthetic", help="emit a synthetic test group")
    p.add_argument("--out", required=True)
    p.add_argument("--group-size", type=int, default=4)
    p.add_argument("--image-size", type=int, default=64)
    p.add_argument("--sources", type=int, default=4)
    p.add_argument("--corrupt", default="none", help="source index to invert, or 'none'")
    p.add_argument("--shift", default="3,0", help="per-image translation step, 'dx,dy'")
    p.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command in ("run", "cluster", "fuse", "segment"):
            cfg = _config_from_args(args)
            stage = {
                "run": run_pipeline,
                "cluster": cluster_stage,
                "fuse": fuse_stage,
                "segment": segment_stage,
            }[args.command]
            stage(cfg)
        elif args.command == "evaluate":
            dataset = load_dataset(args.dataset)
            report = score(args.preds, dataset)
            print(report_table(report))
            if args.out:
                with open(args.out, "w", encoding="utf-8") as f:
                    f.write("\n".join(report_lines(report)) + "\n")
            if not report.ok:
                return 1
        elif args.command == "gen-synthetic":
            corruption = None if args.corrupt == "none" else int(args.corrupt)
            dx, dy = (int(v) for v in args.shift.split(","))
            group = gen_synthetic(
                args.out,
                group_size=args.group_size,
                image_size=args.image_size,
                sources=args.sources,
                corruption=corruption,
                shift=(dx, dy),
                seed=args.seed,
            )
            print(f"wrote synthetic group to {group.root} (config: {group.config_path})")
    except (ConfigurationError, FormatError, OSError, ValueError) as e:
        print(f"coseg: error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
