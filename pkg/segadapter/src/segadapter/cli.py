"""segexport: batch inference to annotation files.

    segexport --model torchvision:maskrcnn_resnet50_fpn \
        --class-map 1=stitch --class-map 2=vessel \
        --class-threshold 0.5 --mask-threshold 0.5 \
        --out annotations/ photos/*.jpg
"""

from __future__ import annotations

import argparse
import sys

from .adapter import AdapterConfig, ModelLoadError, infer_and_export


def parse_class_map(entries) -> dict[str, str]:
    mapping = {}
    for entry in entries or []:
        raw, sep, cls = entry.partition("=")
        if not sep:
            raise ValueError(f"--class-map expects label=class, got {entry!r}")
        mapping[raw] = cls
    return mapping


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="segexport", description=__doc__)
    parser.add_argument("images", nargs="+", help="input photographs")
    parser.add_argument("--model", required=True, help="model identifier, e.g. torchvision:maskrcnn_resnet50_fpn")
    parser.add_argument("--class-threshold", type=float, default=0.5)
    parser.add_argument("--mask-threshold", type=float, default=0.5)
    parser.add_argument(
        "--class-map",
        action="append",
        metavar="LABEL=CLASS",
        help="map a raw model label to stitch or vessel (repeatable)",
    )
    parser.add_argument("--out", required=True, help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = AdapterConfig(
            model=args.model,
            class_threshold=args.class_threshold,
            mask_threshold=args.mask_threshold,
            class_map=parse_class_map(args.class_map),
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        written = infer_and_export(args.images, config, args.out)
    except (ModelLoadError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
