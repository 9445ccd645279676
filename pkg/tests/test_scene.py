import math

import numpy as np
import pytest

from suturescore.geometry import RotatedBox
from suturescore.interchange import AnnotationSet, Instance
from suturescore.scene import (
    NoVesselError,
    SceneWarning,
    assign_axes,
    build_scene,
    order_and_link,
)


def rot(theta_deg):
    t = math.radians(theta_deg)
    return np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])


def rect_instance(cls, center, axis_deg, half_along, half_across):
    """Rectangle polygon: half_along spans the axis direction, half_across its normal."""
    u = np.array([math.cos(math.radians(axis_deg)), math.sin(math.radians(axis_deg))])
    v = np.array([-u[1], u[0]])
    c = np.asarray(center, dtype=float)
    a, b = u * half_along, v * half_across
    return Instance(
        class_label=cls,
        polygon=tuple(map(tuple, [c + a + b, c - a + b, c - a - b, c + a - b])),
    )


def nominal_annotations(
    n=8,
    vessel_len=2000.0,
    vessel_h=300.0,
    spacing=None,
    stitch_w=180.0,
    stitch_h=60.0,
    width=2400,
    height=2400,
):
    """Equidistant perpendicular stitches on a horizontal junction line."""
    spacing = spacing if spacing is not None else vessel_len / n
    cx, cy = width / 2.0, height / 2.0
    instances = [
        rect_instance("vessel", (cx, cy), 0.0, vessel_len / 2.0, vessel_h / 2.0)
    ]
    x0 = cx - (n - 1) / 2.0 * spacing
    for i in range(n):
        instances.append(
            rect_instance("stitch", (x0 + i * spacing, cy), 0.0, stitch_h / 2.0, stitch_w / 2.0)
        )
    return AnnotationSet(
        image_id="nominal", width=width, height=height, instances=tuple(instances)
    )


class TestAssignAxes:
    def test_axis_aligned_split(self):
        box = RotatedBox(center=(0, 0), edge_w=(0, 3), edge_h=(1, 0))
        orientation, width_len, height_len = assign_axes(box, (1, 0))
        assert np.allclose(orientation, [1, 0])
        assert height_len == pytest.approx(2.0)
        assert width_len == pytest.approx(6.0)
        assert width_len / height_len == pytest.approx(3.0)

    def test_rotated_box_keeps_aspect_and_reports_angle(self):
        R = rot(20)
        ew = R @ np.array([0, 3.0])
        eh = R @ np.array([1.0, 0])
        box = RotatedBox(center=(5, 5), edge_w=tuple(ew), edge_h=tuple(eh))
        orientation, width_len, height_len = assign_axes(box, (1, 0))
        alpha = math.degrees(math.acos(min(1.0, abs(float(orientation @ np.array([1, 0]))))))
        assert alpha == pytest.approx(20.0, abs=1e-9)
        assert width_len / height_len == pytest.approx(3.0, rel=1e-12)

    def test_orientation_signed_toward_line(self):
        box = RotatedBox(center=(0, 0), edge_w=(0, 3), edge_h=(-1, 0))
        orientation, _, _ = assign_axes(box, (1, 0))
        assert float(orientation @ np.array([1, 0])) >= 0

    def test_square_at_45_ties_with_warning(self):
        R = rot(45)
        box = RotatedBox(
            center=(0, 0), edge_w=tuple(R @ [1.0, 0]), edge_h=tuple(R @ [0, 1.0])
        )
        with pytest.warns(SceneWarning, match="equally aligned"):
            orientation, width_len, height_len = assign_axes(box, (1, 0))
        assert width_len / height_len == pytest.approx(1.0)

    def test_square_axis_aligned(self):
        box = RotatedBox(center=(0, 0), edge_w=(1, 0), edge_h=(0, 1))
        orientation, width_len, height_len = assign_axes(box, (1, 0))
        assert width_len / height_len == pytest.approx(1.0)
        assert math.degrees(math.acos(abs(float(orientation @ np.array([1, 0]))))) == pytest.approx(0.0)


def small_box(center):
    return RotatedBox(center=center, edge_w=(10, 0), edge_h=(0, 4))


class TestOrderAndLink:
    def test_right_angle_bend(self):
        boxes = [small_box((0, 0)), small_box((1000, 0)), small_box((1000, 1000))]
        _, gaps, beta, _ = order_and_link(boxes, (1, 0), 1000.0)
        assert np.allclose(gaps, [(1000, 0), (0, 1000)])
        assert beta[0] == pytest.approx(90.0)

    def test_collinear_equidistant_all_zero(self):
        boxes = [small_box((i * 100.0, 50.0)) for i in range(6)]
        _, _, beta, norm_gaps = order_and_link(boxes, (1, 0), 800.0)
        assert np.allclose(beta, 0.0, atol=1e-12)
        assert np.allclose(norm_gaps, 0.125)

    def test_eight_equidistant_eighth_spacing(self):
        L = 1600.0
        boxes = [small_box((i * L / 8.0, 0.0)) for i in range(8)]
        _, _, _, norm_gaps = order_and_link(boxes, (1, 0), L)
        assert len(norm_gaps) == 7
        assert np.allclose(norm_gaps, 0.125)

    def test_sort_ties_broken_by_perpendicular(self):
        boxes = [small_box((0, 0)), small_box((1000, 0)), small_box((1000, 1000))]
        ordered, gaps, beta, _ = order_and_link(boxes, (1, 0), 1000.0)
        assert [b.center for b in ordered] == [(0, 0), (1000, 0), (1000, 1000)]


class TestBuildScene:
    def test_nominal_scene(self):
        ann = nominal_annotations()
        scene = build_scene(ann)
        assert scene.n == 8
        assert np.allclose([s.alpha_deg for s in scene.stitches], 0.0, atol=1e-9)
        assert np.allclose(scene.beta_deg, 0.0, atol=1e-9)
        assert np.allclose(scene.norm_gaps, 0.125, atol=1e-12)
        assert scene.vessel_axis_len == pytest.approx(2000.0)
        assert np.allclose([s.aspect for s in scene.stitches], 3.0, atol=1e-12)

    def test_line_from_stitch_centers(self):
        # stitch centers on y = 2x (relative): expect line (1, 2)/sqrt(5)
        instances = [rect_instance("vessel", (500, 500), 63.434948822922, 450, 80)]
        for i in range(5):
            c = np.array([200.0, 100.0]) + i * np.array([60.0, 120.0])
            instances.append(rect_instance("stitch", c, 63.434948822922 + 90.0, 20, 60))
        ann = AnnotationSet(image_id="diag", width=1000, height=1000, instances=tuple(instances))
        scene = build_scene(ann)
        assert np.allclose(scene.line_dir, np.array([1, 2]) / math.sqrt(5), atol=1e-9)

    def test_no_vessel_is_fatal(self):
        ann = nominal_annotations()
        stitches_only = AnnotationSet(
            image_id="x",
            width=ann.width,
            height=ann.height,
            instances=ann.by_class("stitch"),
        )
        with pytest.raises(NoVesselError):
            build_scene(stitches_only)

    def test_single_stitch_scene_built_with_warning(self):
        ann = nominal_annotations()
        one = AnnotationSet(
            image_id="x",
            width=ann.width,
            height=ann.height,
            instances=(ann.instances[0], ann.instances[1]),
        )
        with pytest.warns(SceneWarning):
            scene = build_scene(one)
        assert scene.n == 1
        assert scene.gap_vectors == () and scene.beta_deg == () and scene.norm_gaps == ()
        assert any("fewer than 2" in w for w in scene.warnings)

    def test_vessel_only_scene(self):
        ann = nominal_annotations()
        vessel_only = AnnotationSet(
            image_id="x",
            width=ann.width,
            height=ann.height,
            instances=ann.by_class("vessel"),
        )
        with pytest.warns(SceneWarning):
            scene = build_scene(vessel_only)
        assert scene.n == 0
        assert scene.stitches == () and scene.norm_gaps == ()
        assert scene.vessel_axis_len == pytest.approx(2000.0)

    def test_largest_vessel_wins(self):
        ann = nominal_annotations()
        extra = rect_instance("vessel", (300, 300), 0.0, 50, 20)
        doubled = AnnotationSet(
            image_id="x",
            width=ann.width,
            height=ann.height,
            instances=(extra,) + ann.instances,
        )
        with pytest.warns(SceneWarning, match="largest"):
            scene = build_scene(doubled)
        assert scene.vessel_axis_len == pytest.approx(2000.0)

    def test_mask_path_close_to_direct(self):
        ann = nominal_annotations()
        rotated = transform(ann, rot(25.0))
        direct = build_scene(rotated)
        masked = build_scene(rotated, from_masks=True)
        assert masked.n == direct.n
        for a, b in zip(direct.stitches, masked.stitches):
            assert b.aspect == pytest.approx(a.aspect, abs=0.02)
            assert b.alpha_deg == pytest.approx(a.alpha_deg, abs=0.3)
            assert b.norm_width == pytest.approx(a.norm_width, abs=0.001)


def transform(ann: AnnotationSet, matrix=None, scale=1.0, reflect=False):
    """Apply scale/rotation/reflection about the image center, on a padded canvas."""
    matrix = np.eye(2) if matrix is None else np.asarray(matrix, dtype=float)
    matrix = matrix * scale
    if reflect:
        matrix = -matrix
    old_center = np.array([ann.width / 2.0, ann.height / 2.0])
    size = int(math.ceil(2.2 * scale * max(ann.width, ann.height)))
    new_center = np.array([size / 2.0, size / 2.0])
    instances = []
    for inst in ann.instances:
        poly = (inst.polygon_array() - old_center) @ matrix.T + new_center
        instances.append(
            Instance(
                class_label=inst.class_label,
                polygon=tuple(map(tuple, poly)),
                confidence=inst.confidence,
            )
        )
    return AnnotationSet(
        image_id=ann.image_id, width=size, height=size, instances=tuple(instances)
    )


def scene_attributes(scene):
    return {
        "alpha": np.array([s.alpha_deg for s in scene.stitches]),
        "aspect": np.array([s.aspect for s in scene.stitches]),
        "norm_width": np.array([s.norm_width for s in scene.stitches]),
        "beta": np.array(scene.beta_deg),
        "norm_gaps": np.array(scene.norm_gaps),
    }


class TestInvariances:
    def setup_method(self):
        ann = nominal_annotations(spacing=230.0)
        self.ann = transform(ann, rot(17.0))
        self.base = scene_attributes(build_scene(self.ann))

    def test_scale_invariance(self):
        for scale in (0.25, 4.0):
            scaled = transform(self.ann, scale=scale)
            attrs = scene_attributes(build_scene(scaled))
            for key, base in self.base.items():
                assert np.allclose(attrs[key], base, rtol=1e-9, atol=1e-12), key

    def test_rotation_invariance(self):
        for theta in (10.0, 45.0, 90.0, 135.0, 200.0, 275.0, 333.0):
            rotated = transform(self.ann, rot(theta))
            attrs = scene_attributes(build_scene(rotated))
            for key, base in self.base.items():
                got, want = np.sort(attrs[key]), np.sort(base)
                assert np.allclose(got, want, atol=1e-6), (key, theta)

    def test_reversal_invariance(self):
        reflected = transform(self.ann, reflect=True)
        attrs = scene_attributes(build_scene(reflected))
        for key, base in self.base.items():
            assert np.allclose(np.sort(attrs[key]), np.sort(base), atol=1e-9), key

    def test_order_reversal_via_negated_line(self):
        scene = build_scene(self.ann)
        line = np.array(scene.line_dir)
        boxes = [s.box for s in scene.stitches]
        _, _, beta_fwd, gaps_fwd = order_and_link(boxes, line, scene.vessel_axis_len)
        _, _, beta_rev, gaps_rev = order_and_link(boxes, -line, scene.vessel_axis_len)
        assert np.allclose(sorted(beta_fwd), sorted(beta_rev), atol=1e-12)
        assert np.allclose(sorted(gaps_fwd), sorted(np.abs(gaps_rev)), atol=1e-12)
