"""Mask-free sketch-based local image editing.

Draw a partial contour on top of an image; the model predicts where to
edit, encodes the region's appearance into a structure-agnostic style
vector, synthesizes matching content with a gated-convolution generator,
and blends it back. Training is fully self-supervised through local
triangular warping.
"""

__version__ = "0.1.0"
