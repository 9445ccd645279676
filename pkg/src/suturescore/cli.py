"""Command-line pipeline: assess, calibrate, eval, synth.

Exit codes: 0 success, 1 usage error, 2 partial failure (some images failed
but the batch continued), 3 fatal error (unusable inputs).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import warnings
from pathlib import Path

from . import calibration as cal
from .detection_eval import EvaluationError, evaluate
from .errors import (
    DEFAULT_THRESHOLDS,
    DetectionConfig,
    ThresholdError,
    Thresholds,
    detect_all,
    load_thresholds,
    serialize_thresholds,
)
from .interchange import (
    AnnotationError,
    ScoreTableError,
    parse_annotation_file,
    parse_scores,
)
from .overlay import render_overlay
from .scene import SceneError, build_scene
from .synth import GenerationError, generate_scene, load_scene_spec

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARTIAL = 2
EXIT_FATAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _dump_json(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _write_atomic(path: Path, text: str):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _box_dict(box) -> dict:
    return {
        "center": list(box.center),
        "edge_w": list(box.edge_w),
        "edge_h": list(box.edge_h),
    }


def _assessment_report(scene, report, config: DetectionConfig) -> dict:
    return {
        "image_id": scene.image_id,
        "n_stitches": scene.n,
        "expected_stitches": config.expected_stitches,
        "line_dir": list(scene.line_dir),
        "vessel_axis_len": scene.vessel_axis_len,
        "vessel_box": _box_dict(scene.vessel_box),
        "stitches": [
            {
                "index": s.index,
                "center": list(s.center),
                "orientation": list(s.orientation),
                "box": _box_dict(s.box),
                "width_len": s.width_len,
                "height_len": s.height_len,
                "aspect": s.aspect,
                "alpha_deg": s.alpha_deg,
                "norm_width": s.norm_width,
            }
            for s in scene.stitches
        ],
        "gap_vectors": [list(g) for g in scene.gap_vectors],
        "beta_deg": list(scene.beta_deg),
        "norm_gaps": list(scene.norm_gaps),
        "errors": report.to_dict(),
        "warnings": list(scene.warnings),
    }


def cmd_assess(args) -> int:
    try:
        thresholds = (
            load_thresholds(Path(args.thresholds).read_text())
            if args.thresholds
            else DEFAULT_THRESHOLDS
        )
    except (OSError, ThresholdError) as exc:
        print(f"error: cannot load thresholds from {args.thresholds}: {exc}", file=sys.stderr)
        return EXIT_FATAL
    config = DetectionConfig(expected_stitches=args.expected_stitches)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    summary = {"images": [], "failures": []}
    for path in args.inputs:
        path = Path(path)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                annotations = parse_annotation_file(path.read_bytes())
                scene = build_scene(annotations, from_masks=args.from_masks)
            report = detect_all(scene, thresholds, config)
        except (OSError, AnnotationError, SceneError) as exc:
            print(f"{path}: FAILED: {exc}", file=sys.stderr)
            summary["failures"].append({"input": str(path), "error": str(exc)})
            continue
        doc = _assessment_report(scene, report, config)
        report_path = out_dir / f"{scene.image_id}.report.json"
        svg_path = out_dir / f"{scene.image_id}.overlay.svg"
        _write_atomic(report_path, _dump_json(doc))
        _write_atomic(
            svg_path, render_overlay(scene, report, annotations.width, annotations.height)
        )
        summary["images"].append(
            {
                "image_id": scene.image_id,
                "input": str(path),
                "counts": list(report.counts()),
                "report": report_path.name,
                "overlay": svg_path.name,
            }
        )
        print(f"{path}: s1..s5 = {report.counts()}")
    _write_atomic(out_dir / "summary.json", _dump_json(summary))
    if summary["failures"]:
        print(f"{len(summary['failures'])} image(s) failed", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def _load_annotation_dir(directory: Path) -> list:
    paths = sorted(p for p in directory.glob("*.json") if not p.name.endswith(".gt.json"))
    if not paths:
        raise AnnotationError(f"no annotation files in {directory}")
    sets = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for path in paths:
            sets.append(parse_annotation_file(path.read_bytes()))
    return sets


def cmd_calibrate(args) -> int:
    try:
        table = parse_scores(Path(args.scores).read_bytes())
    except (OSError, ScoreTableError) as exc:
        print(f"error: cannot load scores from {args.scores}: {exc}", file=sys.stderr)
        return EXIT_FATAL
    try:
        annotation_sets = _load_annotation_dir(Path(args.annotations))
        scenes = [build_scene(ann) for ann in annotation_sets]
    except (OSError, AnnotationError, SceneError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL

    image_ids = [s.image_id for s in scenes]
    try:
        if args.clean:
            rater_trials = table.assignments()
            t1, t2 = args.clean
            tables = {trial: table.for_assignment(rater, trial)
                      for rater, trial in rater_trials if trial in (t1, t2)}
            if t1 not in tables or t2 not in tables:
                raise ScoreTableError(
                    f"clean trials {t1!r}, {t2!r} not both present in the score file"
                )
            scores_t1, scores_t2 = tables[t1], tables[t2]
            retained = {
                etype: set(cal.clean_dataset(scores_t1, scores_t2, etype))
                for etype in cal.ERROR_TYPES
            }
            base_scores = scores_t2
        else:
            base_scores = table.single_assignment()
            retained = {etype: set(image_ids) for etype in cal.ERROR_TYPES}
        missing = sorted(set(image_ids) - set(base_scores))
        if missing:
            raise ScoreTableError("score file missing images: " + ", ".join(missing))

        values: dict[str, float] = {}
        for etype, field_names in (
            ("E1", ("beta_star",)),
            ("E2", ("alpha_star",)),
            ("E3", ("l_w_plus",)),
            ("E4", ("l_w_minus", "a_star")),
            ("E5", ("l_d_minus", "l_d_plus")),
        ):
            kept_scenes = [s for s in scenes if s.image_id in retained[etype]]
            dataset = cal.CalibrationDataset.from_scenes(
                kept_scenes, base_scores, expected_stitches=args.expected_stitches
            )
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                if len(field_names) == 1:
                    values[field_names[0]] = cal.calibrate_single(dataset, etype)
                else:
                    low, high = cal.calibrate_pair(dataset, etype, grid_step=args.grid_step)
                    values[field_names[0]] = low
                    values[field_names[1]] = high
        thresholds = Thresholds(**values)
    except (cal.CalibrationError, ScoreTableError, ThresholdError) as exc:
        print(f"error: calibration failed: {exc}", file=sys.stderr)
        return EXIT_FATAL

    _write_atomic(Path(args.out), serialize_thresholds(thresholds))
    print(f"thresholds written to {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        preds = _load_annotation_dir(Path(args.pred))
        gts = _load_annotation_dir(Path(args.gt))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            report = evaluate(preds, gts, with_masks=not args.boxes_only)
    except (OSError, AnnotationError, EvaluationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    doc = _dump_json(report.to_dict())
    if args.out:
        Path(args.out).write_text(doc)
    else:
        sys.stdout.write(doc)
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        spec = load_scene_spec(Path(args.spec).read_text())
    except (OSError, GenerationError) as exc:
        print(f"error: cannot load scene spec from {args.spec}: {exc}", file=sys.stderr)
        return EXIT_FATAL
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        annotations, ground_truth = generate_scene(spec, args.seed)
    except GenerationError as exc:
        print(f"error: generation failed: {exc}", file=sys.stderr)
        return EXIT_FATAL
    from .interchange import serialize_annotation_set

    ann_path = out_dir / f"{annotations.image_id}.json"
    gt_path = out_dir / f"{annotations.image_id}.gt.json"
    _write_atomic(ann_path, serialize_annotation_set(annotations))
    _write_atomic(gt_path, _dump_json(ground_truth.to_dict()))
    print(f"wrote {ann_path} and {gt_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="suturescore", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("assess", help="score annotated images and render overlays")
    p.add_argument("inputs", nargs="+", help="annotation JSON files")
    p.add_argument("--thresholds", help="threshold config JSON (defaults when omitted)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--expected-stitches", type=int, default=8)
    p.add_argument(
        "--from-masks",
        action="store_true",
        help="rasterize polygons and re-trace contours before fitting boxes",
    )
    p.set_defaults(func=cmd_assess)

    p = sub.add_parser("calibrate", help="identify thresholds from rater scores")
    p.add_argument("annotations", help="directory of annotation JSON files")
    p.add_argument("--scores", required=True, help="rater score CSV")
    p.add_argument(
        "--clean",
        type=lambda s: tuple(s.split(",", 1)),
        help="trial pair t1,t2: drop per-error conflicting images, calibrate on t2",
    )
    p.add_argument("--out", required=True, help="output threshold JSON")
    p.add_argument("--expected-stitches", type=int, default=8)
    p.add_argument("--grid-step", type=float, default=0.005)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("eval", help="average precision of predicted annotations")
    p.add_argument("--pred", required=True, help="directory of predicted annotations")
    p.add_argument("--gt", required=True, help="directory of ground-truth annotations")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--boxes-only", action="store_true", help="skip mask IoU")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic scene with ground truth")
    p.add_argument("--spec", required=True, help="scene spec JSON")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
