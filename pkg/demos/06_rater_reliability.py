"""Measuring rater self-consistency and cleaning conflicting scores.

Two scoring sessions of the same images are compared with two agreement
levels: true accuracy (exact count match) and binary accuracy (error
presence match).  Images where the sessions conflict can be excluded before
re-calibration.
"""

import numpy as np

from suturescore import clean_dataset, reliability_report

rng = np.random.default_rng(9)

# Session one: per-image counts for the five error kinds.
trial1 = {f"img-{k:02d}": tuple(int(c) for c in rng.integers(0, 3, 5)) for k in range(23)}

# Session two drifts: some counts change, some only in magnitude.
trial2 = {}
for image_id, counts in trial1.items():
    counts = list(counts)
    for e in range(5):
        r = rng.uniform()
        if r < 0.15:
            counts[e] += 1  # saw one more error
        elif r < 0.25 and counts[e] > 0:
            counts[e] -= 1
    trial2[image_id] = tuple(counts)

report = reliability_report(trial2, trial1)
print(f"{'error':6s} {'true_acc':>8s} {'bin_acc':>8s} {'agree':>6s} {'conflict':>9s}")
for error_type, agg in report.per_error.items():
    print(
        f"{error_type:6s} {agg.true_accuracy:8.3f} {agg.binary_accuracy:8.3f}"
        f" {agg.agreeing:6d} {agg.conflicting:9d}"
    )

print("\nimages retained after excluding per-error conflicts:")
for error_type in report.per_error:
    retained = clean_dataset(trial1, trial2, error_type)
    print(f"  {error_type}: {len(retained)} of {len(trial1)}")

print("\nworked example: test [2,0,1] vs reference [2,1,1]")
from suturescore import binary_accuracy, true_accuracy

print(f"  true accuracy   = {true_accuracy([2, 0, 1], [2, 1, 1]):.3f}")
print(f"  binary accuracy = {binary_accuracy([2, 0, 1], [2, 1, 1]):.3f}")
