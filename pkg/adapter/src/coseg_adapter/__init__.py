"""Adapter between pretrained vision models and the coseg pipeline's file formats.

Emits per-source saliency PNGs, Middlebury .flo correspondence fields with a
pair-manifest, and a global feature file. Everything is exchanged on disk; the
pipeline package is never imported.
"""

from .backends import (
    AdapterError,
    make_feature_backend,
    make_flow_backend,
    make_saliency_backend,
)
from .jobs import run_features, run_flows, run_saliency

__all__ = [
    "AdapterError",
    "make_saliency_backend",
    "make_flow_backend",
    "make_feature_backend",
    "run_saliency",
    "run_flows",
    "run_features",
]

__version__ = "0.1.0"
