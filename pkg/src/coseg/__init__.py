"""Multi-source saliency fusion for object co-segmentation.

Groups of images are clustered into sub-groups, each sub-group's saliency maps
are aligned into its key image's frame and fused by a per-pixel median, the
fused maps are propagated back to the members, and GrabCut turns each fused map
into a binary mask of the shared object.
"""

from .raster import BinaryMask, FlowField, RasterPlane
from .grouping import FeatureVector, SubGrouping
from .warp import WarpedMap
from .fusion import CandidateStack, FusedMap
from .graphcut import GmmModel, GrabCut, TrimapSeed
from .maxflow import FlowNetworkGraph
from .evaluate import ScoreReport

__all__ = [
    "BinaryMask",
    "CandidateStack",
    "FeatureVector",
    "FlowField",
    "FlowNetworkGraph",
    "FusedMap",
    "GmmModel",
    "GrabCut",
    "RasterPlane",
    "ScoreReport",
    "SubGrouping",
    "TrimapSeed",
    "WarpedMap",
]

__version__ = "0.1.0"
