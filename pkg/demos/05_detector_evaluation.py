"""Scoring a detector's annotations against ground truth with AP metrics.

Simulates a detector by perturbing ground-truth polygons and assigning
confidences, then evaluates box and mask average precision at IoU 0.5 and
averaged over 0.50:0.05:0.95.
"""

import json

import numpy as np

from suturescore import evaluate, generate_scene
from suturescore.interchange import AnnotationSet, Instance
from suturescore.synth import SceneSpec

rng = np.random.default_rng(3)

ground_truth, predictions = [], []
for image in range(4):
    annotations, _ = generate_scene(SceneSpec(image_id=f"eval-{image}"), seed=200 + image)
    ground_truth.append(annotations)

    noisy = []
    for inst in annotations.instances:
        poly = inst.polygon_array()
        jitter = rng.normal(0, 3.0, size=2)  # shift whole instances slightly
        noisy.append(
            Instance(
                class_label=inst.class_label,
                polygon=tuple(map(tuple, poly + jitter)),
                confidence=float(rng.uniform(0.55, 0.99)),
            )
        )
    if rng.uniform() < 0.5:  # drop one stitch: a miss
        del noisy[-1]
    predictions.append(
        AnnotationSet(
            image_id=annotations.image_id,
            width=annotations.width,
            height=annotations.height,
            instances=tuple(noisy),
        )
    )

report = evaluate(predictions, ground_truth)
print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
