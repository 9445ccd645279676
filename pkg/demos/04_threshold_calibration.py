"""Recovering detection thresholds from image-level rater counts.

Raters report how many errors of each kind an image contains, never which
stitch is at fault.  This demo builds a corpus whose attribute values
bracket each planted threshold, infers per-stitch labels from the counts,
and recovers all seven thresholds by ROC sweep plus grid search.
"""

from suturescore import (
    DEFAULT_THRESHOLDS,
    CalibrationDataset,
    build_scene,
    calibrate_pair,
    calibrate_single,
    generate_scene,
)
from suturescore.synth import GenerationError, Injection, SceneSpec

# Pairs of (just-above, just-below) threshold injections pin each constant.
KINDS = [
    (),
    (Injection("E1", 3, magnitude=32.5),),
    (Injection("E1", 4, magnitude=27.0),),
    (Injection("E2", 2, magnitude=40.0),),
    (Injection("E2", 5, magnitude=36.3),),
    (Injection("E3", 1, magnitude=0.136),),
    (Injection("E3", 6, magnitude=0.124),),
    (Injection("E4", 2, mode="low_aspect", magnitude=2.32),),
    (Injection("E4", 5, mode="low_aspect", magnitude=2.55),),
    (Injection("E4", 3, mode="low_width", magnitude=0.052),),
    (Injection("E4", 1, mode="low_width", magnitude=0.066),
     Injection("E4", 6, mode="low_aspect", magnitude=2.32)),
    (Injection("E5", 2, magnitude=0.155),),
    (Injection("E5", 4, magnitude=0.142),),
    (Injection("E5", 3, magnitude=0.063),),
    (Injection("E5", 1, magnitude=0.077), Injection("E5", 5, magnitude=0.155)),
    (Injection("E4", 4, mode="drop"),),
]

scenes, scores = [], {}
seed = 100
for k in range(32):
    spec = SceneSpec(
        image_id=f"demo-{k:02d}",
        injections=KINDS[k % len(KINDS)],
        center_jitter=2.0,
        rotation_jitter_deg=4.0,
        size_jitter_frac=0.01,
    )
    while True:
        try:
            annotations, truth = generate_scene(spec, seed)
            seed += 1
            break
        except GenerationError:
            seed += 1
    scenes.append(build_scene(annotations))
    scores[annotations.image_id] = truth.counts()  # honest image-level counts

dataset = CalibrationDataset.from_scenes(scenes, scores, expected_stitches=8)

beta_star = calibrate_single(dataset, "E1")
alpha_star = calibrate_single(dataset, "E2")
l_w_plus = calibrate_single(dataset, "E3")
l_w_minus, a_star = calibrate_pair(dataset, "E4")
l_d_minus, l_d_plus = calibrate_pair(dataset, "E5")

d = DEFAULT_THRESHOLDS
print(f"{len(scenes)} images calibrated")
print(f"{'threshold':12s} {'planted':>9s} {'recovered':>10s}")
for name, planted, got in [
    ("beta_star", d.beta_star, beta_star),
    ("alpha_star", d.alpha_star, alpha_star),
    ("l_w_plus", d.l_w_plus, l_w_plus),
    ("a_star", d.a_star, a_star),
    ("l_w_minus", d.l_w_minus, l_w_minus),
    ("l_d_minus", d.l_d_minus, l_d_minus),
    ("l_d_plus", d.l_d_plus, l_d_plus),
]:
    print(f"{name:12s} {planted:9.3f} {got:10.3f}")
