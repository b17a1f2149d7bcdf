"""Leaf recognition from handcrafted and learned features.

Images go through alignment, cropping and resizing; seven feature branches
are encoded into 100-d embeddings, concatenated, and classified by an
RBF-kernel SVM.
"""

__version__ = "0.1.0"

BRANCHES = ("color", "vein", "xyproj", "shape", "texture", "colorstats", "fourier")
EMBED_DIM = 100
