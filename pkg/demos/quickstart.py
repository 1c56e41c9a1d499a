"""Train SLCRF on a synthetic scene and look at what comes out.

Run from the repository root::

    python3 demos/quickstart.py [outdir]

Writes the class map as a PPM and prints the per-iteration trace.
"""

import os
import sys

import numpy as np

from slcrf import evaluation as ev, optimizer as opt
from slcrf.data import SplitSpec, normalize, split_labels, synthesize

out = sys.argv[1] if len(sys.argv) > 1 else "demo_out"
os.makedirs(out, exist_ok=True)

# A 24x24 scene with 12 bands and three Voronoi-shaped classes.
scene = normalize(synthesize(classes=3, height=24, width=24, bands=12, noise=0.05, seed=0))
labeled, unlabeled = split_labels(scene, SplitSpec(labeled_fraction=0.05, seed=0))
print(f"{len(labeled)} labelled pixels, {len(unlabeled)} to classify")

# The desk preset is tuned for scenes of this size.
hp = opt.preset("desk", seed=0)
data = opt.prepare_data(scene, labeled, hp)


def show(rec):
    print(f"iter {rec.iter:3d}  objective {rec.objective:9.4f}  "
          f"||Z-M|| {rec.feasibility:.2e}  unary {rec.unary:8.3f}")


result = opt.run(data, hp, callback=show)
print(f"stopped: {result.trace.stopped}")

pred = opt.predict(result.network, result.weights, scene, hp)
report = ev.evaluate_map(pred, scene.labels, unlabeled, scene.classes)
print(f"OA {report.oa:.4f}  AA {report.aa:.4f}  kappa {report.kappa:.4f}")
print("confusion (rows = truth):")
print(report.confusion)

# Every mistake should sit next to a class boundary.
wrong = np.argwhere(pred != scene.labels)
border = [(y, x) for y, x in wrong
          if len(np.unique(scene.labels[max(y - 2, 0):y + 3, max(x - 2, 0):x + 3])) > 1]
print(f"{len(wrong)} errors, {len(border)} of them within two pixels of a boundary")

ev.render_map(pred, os.path.join(out, "prediction.ppm"), classes=scene.classes)
ev.render_map(scene.labels, os.path.join(out, "truth.ppm"), classes=scene.classes)
print(f"maps written to {out}/")
