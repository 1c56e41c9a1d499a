"""Compare SLCRF with its ablations and the PCA baseline on one split.

    python3 demos/ablation.py [seed]

RE-CRF drops the sparse coding term and builds the CRF affinity from
pixel positions alone; SL-only drops the CRF and fits a softmax on the
learned codes; PCA-SC classifies flattened patches of PCA scores.
"""

import sys

from slcrf import evaluation as ev, optimizer as opt
from slcrf.data import SplitSpec, normalize, split_labels, synthesize

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
scene = normalize(synthesize(seed=seed))
labeled, unlabeled = split_labels(scene, SplitSpec(0.05, seed))
reports = ev.compare_methods(scene, labeled, unlabeled, opt.preset("desk", seed=seed))

print(f"{'method':8s} {'OA':>7s} {'AA':>7s} {'kappa':>7s}")
for name, rep in reports.items():
    print(f"{name:8s} {rep.oa:7.4f} {rep.aa:7.4f} {rep.kappa:7.4f}")
