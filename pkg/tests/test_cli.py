import json
from pathlib import Path

import pytest

from suturescore.cli import main
from suturescore.errors import load_thresholds
from suturescore.interchange import parse_annotation_file, serialize_annotation_set
from suturescore.overlay import count_red_elements, render_overlay
from suturescore.scene import build_scene
from suturescore.errors import DetectionConfig, detect_all
from suturescore.synth import (
    GenerationError,
    Injection,
    SceneSpec,
    generate_scene,
    serialize_scene_spec,
)


def write_scene(directory: Path, spec: SceneSpec, seed: int):
    ann, gt = generate_scene(spec, seed)
    path = directory / f"{ann.image_id}.json"
    path.write_text(serialize_annotation_set(ann))
    return ann, gt, path


def first_good_seed(spec: SceneSpec, start: int = 0) -> int:
    seed = start
    while True:
        try:
            generate_scene(spec, seed)
            return seed
        except GenerationError:
            seed += 1


class TestAssess:
    def test_e3_fixture_report_and_overlay(self, tmp_path):
        spec = SceneSpec(injections=(Injection("E3", 2),))
        seed = first_good_seed(spec)
        ann, gt, path = write_scene(tmp_path, spec, seed)
        out = tmp_path / "out"
        assert main(["assess", "--out", str(out), str(path)]) == 0
        report = json.loads((out / f"{ann.image_id}.report.json").read_text())
        assert report["errors"]["s3"] == 1
        assert report["n_stitches"] == 8
        assert len(report["stitches"]) == 8
        assert len(report["errors"]["e5_flags"]) == 7
        assert len(report["errors"]["e1_flags"]) == 6
        svg = (out / f"{ann.image_id}.overlay.svg").read_text()
        assert count_red_elements(svg) == 1
        summary = json.loads((out / "summary.json").read_text())
        assert summary["failures"] == []

    def test_empty_input_list_usage_error(self, tmp_path):
        assert main(["assess", "--out", str(tmp_path / "o")]) == 1

    def test_unreadable_threshold_file(self, tmp_path, capsys):
        spec = SceneSpec()
        seed = first_good_seed(spec)
        _, _, path = write_scene(tmp_path, spec, seed)
        rc = main(
            [
                "assess",
                "--thresholds",
                str(tmp_path / "absent.json"),
                "--out",
                str(tmp_path / "o"),
                str(path),
            ]
        )
        assert rc != 0
        assert "absent.json" in capsys.readouterr().err

    def test_bad_image_continues_batch(self, tmp_path):
        spec = SceneSpec()
        seed = first_good_seed(spec)
        ann, _, path = write_scene(tmp_path, spec, seed)
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"image_id": "bad", "width": 100, "height": 100, "instances": []}))
        out = tmp_path / "out"
        rc = main(["assess", "--out", str(out), str(bad), str(path)])
        assert rc == 2  # partial failure
        summary = json.loads((out / "summary.json").read_text())
        assert len(summary["failures"]) == 1
        assert (out / f"{ann.image_id}.report.json").exists()

    def test_determinism_byte_identical(self, tmp_path):
        spec = SceneSpec(injections=(Injection("E2", 3),))
        seed = first_good_seed(spec)
        ann, _, path = write_scene(tmp_path, spec, seed)
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["assess", "--out", str(out), str(path)]) == 0
            outs.append(
                (
                    (out / f"{ann.image_id}.report.json").read_bytes(),
                    (out / f"{ann.image_id}.overlay.svg").read_bytes(),
                )
            )
        assert outs[0] == outs[1]


class TestSynthCommand:
    def test_outputs_and_determinism(self, tmp_path):
        spec = SceneSpec(injections=(Injection("E5", 1),))
        seed = first_good_seed(spec)
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(serialize_scene_spec(spec))
        pairs = []
        for name in ("a", "b"):
            out = tmp_path / name
            rc = main(["synth", "--spec", str(spec_path), "--seed", str(seed), "--out", str(out)])
            assert rc == 0
            files = sorted(out.glob("*.json"))
            assert len(files) == 2
            pairs.append(tuple(f.read_bytes() for f in files))
        assert pairs[0] == pairs[1]

    def test_generated_annotations_parse_and_assess(self, tmp_path):
        spec = SceneSpec()
        seed = first_good_seed(spec)
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(serialize_scene_spec(spec))
        out = tmp_path / "o"
        assert main(["synth", "--spec", str(spec_path), "--seed", str(seed), "--out", str(out)]) == 0
        ann_file = next(p for p in out.glob("*.json") if not p.name.endswith(".gt.json"))
        ann = parse_annotation_file(ann_file.read_bytes())
        gt = json.loads((out / f"{ann.image_id}.gt.json").read_text())
        report = detect_all(build_scene(ann))
        assert [report.s1, report.s2, report.s3, report.s4, report.s5] == [
            gt["s1"], gt["s2"], gt["s3"], gt["s4"], gt["s5"],
        ]


class TestEvalCommand:
    def test_identical_dirs_perfect_ap(self, tmp_path, capsys):
        spec = SceneSpec()
        gt_dir = tmp_path / "gt"
        pred_dir = tmp_path / "pred"
        gt_dir.mkdir()
        pred_dir.mkdir()
        seed = first_good_seed(spec)
        for k, s in enumerate([seed, first_good_seed(spec, seed + 1)]):
            ann, _, _ = write_scene(gt_dir, spec, s)
            from suturescore.interchange import AnnotationSet, Instance

            confident = AnnotationSet(
                image_id=ann.image_id,
                width=ann.width,
                height=ann.height,
                instances=tuple(
                    Instance(i.class_label, i.polygon, confidence=1.0) for i in ann.instances
                ),
            )
            (pred_dir / f"{ann.image_id}.json").write_text(serialize_annotation_set(confident))
        rc = main(["eval", "--pred", str(pred_dir), "--gt", str(gt_dir), "--boxes-only"])
        assert rc == 0
        doc = json.loads(capsys.readouterr().out)
        for cls in doc["classes"].values():
            assert cls["ap50_box"] == 1.0
            assert cls["ap_box"] == 1.0

    def test_duplicate_prediction_fixture(self, tmp_path, capsys):
        gt_dir = tmp_path / "gt"
        pred_dir = tmp_path / "pred"
        gt_dir.mkdir()
        pred_dir.mkdir()
        gt_doc = {
            "image_id": "dup",
            "width": 100,
            "height": 100,
            "instances": [
                {"class": "stitch", "polygon": [[10, 10], [20, 10], [20, 20], [10, 20]]}
            ],
        }
        pred_doc = {
            "image_id": "dup",
            "width": 100,
            "height": 100,
            "instances": [
                {
                    "class": "stitch",
                    "polygon": [[10.3, 10], [20.3, 10], [20.3, 20], [10.3, 20]],
                    "confidence": 0.95,
                },
                {
                    "class": "stitch",
                    "polygon": [[11, 10], [21, 10], [21, 20], [11, 20]],
                    "confidence": 0.25,
                },
            ],
        }
        (gt_dir / "dup.json").write_text(json.dumps(gt_doc))
        (pred_dir / "dup.json").write_text(json.dumps(pred_doc))
        assert main(["eval", "--pred", str(pred_dir), "--gt", str(gt_dir)]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["classes"]["stitch"]["ap50_box"] == 1.0
        assert doc["classes"]["stitch"]["ap50_mask"] == 1.0


class TestCalibrateCommand:
    def test_planted_recovery_through_cli(self, tmp_path):
        from corpus import build_calibration_corpus

        ann_dir = tmp_path / "ann"
        ann_dir.mkdir()
        annotations, _, scores = build_calibration_corpus(16)
        rows = ["image_id,rater_id,trial_id,e1,e2,e3,e4,e5"]
        for ann in annotations:
            (ann_dir / f"{ann.image_id}.json").write_text(serialize_annotation_set(ann))
            s = scores[ann.image_id]
            rows.append(f"{ann.image_id},r1,t2,{s[0]},{s[1]},{s[2]},{s[3]},{s[4]}")
        scores_path = tmp_path / "scores.csv"
        scores_path.write_text("\n".join(rows) + "\n")
        out = tmp_path / "thresholds.json"
        rc = main(
            ["calibrate", str(ann_dir), "--scores", str(scores_path), "--out", str(out)]
        )
        assert rc == 0
        t = load_thresholds(out.read_text())
        # the corpus brackets each planted threshold by construction
        assert 27.0 < t.beta_star < 32.5
        assert 36.3 < t.alpha_star < 40.0
        assert 0.124 < t.l_w_plus < 0.136
        assert 2.32 < t.a_star < 2.55
        assert 0.047 < t.l_w_minus <= 0.066
        assert 0.06 < t.l_d_minus <= 0.077
        assert 0.142 < t.l_d_plus < 0.155

    def test_missing_image_in_scores(self, tmp_path, capsys):
        ann_dir = tmp_path / "ann"
        ann_dir.mkdir()
        spec = SceneSpec(image_id="img-a")
        write_scene(ann_dir, spec, first_good_seed(spec))
        scores = tmp_path / "scores.csv"
        scores.write_text(
            "image_id,rater_id,trial_id,e1,e2,e3,e4,e5\nother,r1,t1,0,0,0,0,0\n"
        )
        rc = main(
            ["calibrate", str(ann_dir), "--scores", str(scores), "--out", str(tmp_path / "t.json")]
        )
        assert rc != 0
        assert "img-a" in capsys.readouterr().err

    def test_clean_on_identical_trials_matches_unclean(self, tmp_path):
        ann_dir = tmp_path / "ann"
        ann_dir.mkdir()
        rows1 = ["image_id,rater_id,trial_id,e1,e2,e3,e4,e5"]
        rows2 = []
        specs = [
            SceneSpec(image_id=f"d{i}", injections=inj)
            for i, inj in enumerate(
                [
                    (),
                    (Injection("E1", 3, magnitude=35.0),),
                    (Injection("E2", 2, magnitude=42.0),),
                    (Injection("E3", 4, magnitude=0.18),),
                    (Injection("E4", 5, mode="low_aspect", magnitude=1.9),),
                    (Injection("E5", 1, magnitude=0.2),),
                ]
            )
        ]
        for spec in specs:
            ann, gt, _ = write_scene(ann_dir, spec, first_good_seed(spec))
            counts = f"{gt.s1},{gt.s2},{gt.s3},{gt.s4},{gt.s5}"
            rows1.append(f"{ann.image_id},r1,t1,{counts}")
            rows2.append(f"{ann.image_id},r1,t2,{counts}")
        scores = tmp_path / "scores.csv"
        scores.write_text("\n".join(rows1 + rows2) + "\n")

        single = tmp_path / "single.csv"
        single.write_text("\n".join(rows1) + "\n")

        out_clean = tmp_path / "clean.json"
        out_plain = tmp_path / "plain.json"
        assert main(["calibrate", str(ann_dir), "--scores", str(scores),
                     "--clean", "t1,t2", "--out", str(out_clean)]) == 0
        assert main(["calibrate", str(ann_dir), "--scores", str(single),
                     "--out", str(out_plain)]) == 0
        assert load_thresholds(out_clean.read_text()) == load_thresholds(out_plain.read_text())


class TestOverlay:
    def test_red_count_matches_flags(self):
        spec = SceneSpec(
            injections=(
                Injection("E2", 1),
                Injection("E3", 4),
                Injection("E5", 6),
                Injection("E4", 5, mode="drop"),
            )
        )
        seed = first_good_seed(spec)
        ann, gt = generate_scene(spec, seed)
        scene = build_scene(ann)
        report = detect_all(scene, config=DetectionConfig(expected_stitches=8))
        svg = render_overlay(scene, report, ann.width, ann.height)
        expected = (
            report.s2
            + report.s3
            + (report.s4 - report.missing_count)
            + sum(report.e1_flags)
            + sum(report.e5_flags)
        )
        assert count_red_elements(svg) == expected
        assert svg.startswith("<svg")
