"""Longitudinal self-supervised pretraining on consecutive image pairs.

The package covers the full desk-scale pipeline: synthetic longitudinal
fundus-like data with known progression dynamics, the image preprocessing
chain, representative-image selection, four pretext objectives over latent
trajectory vectors (time-interval regression, plain reconstruction,
direction-aligned reconstruction, neighborhood-embedding alignment), the
downstream severity-change classifier, and the ROC/DeLong evaluation
protocol.
"""

__version__ = "0.1.0"
