"""Finite-difference tour of the hand-written backward passes.

    python3 demos/gradients.py

Each layer is checked on its own, then the full autoencoder objective
(reconstruction, weight decay, sparse coding, augmented Lagrangian and
CRF terms) on a tiny network with and without batch normalisation.
"""

from slcrf.gradcheck import _layer_suites, check_theta

for name, err in sorted(_layer_suites(0).items()):
    print(f"{name:18s} {err:.2e}")

for label, kw in (("plain", {}), ("batchnorm", {"batch_norm": True}), ("pooled", {"pooled": True})):
    errs = check_theta(0, **kw)
    worst = max(errs, key=errs.get)
    print(f"theta ({label:9s}) worst {worst}: {errs[worst]:.2e}")
