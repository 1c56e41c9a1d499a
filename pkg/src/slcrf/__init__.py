"""Semi-supervised hyperspectral classification with subspace learning and a CRF."""

__version__ = "0.1.0"
