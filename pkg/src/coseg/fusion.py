"""Per-pixel median fusion of aligned candidate maps and propagation of the fused
key-image map back to sub-group members."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .raster import FlowField, PairManifest, RasterPlane
from .warp import WarpedMap, warp_into_key, warp_map


@dataclass(frozen=True)
class CandidateStack:
    """All candidate maps for one key image, already in the key frame."""

    key_id: str
    candidates: list[WarpedMap]

    def __post_init__(self):
        if not self.candidates:
            raise ValueError("candidate stack must be non-empty")
        dims = {(c.values.height, c.values.width) for c in self.candidates}
        if len(dims) != 1:
            raise ValueError(f"candidate dimensions differ: {sorted(dims)}")


@dataclass(frozen=True)
class FusedMap:
    values: RasterPlane

    def __post_init__(self):
        if self.values.channels != 1:
            raise ValueError("fused map must be single-channel")


def _mean_of_maps(maps: list[RasterPlane]) -> np.ndarray:
    return np.mean([m.plane() for m in maps], axis=0)


def median_fuse(stack: CandidateStack, fallback: np.ndarray | None = None) -> FusedMap:
    """Per-pixel median over the valid candidates.

    Even counts average the two middle order statistics. Pixels with no valid
    candidate fall back to `fallback` (the unweighted mean of the key image's
    own raw maps); without a fallback such pixels are an error.
    """
    values = np.stack([c.values.plane() for c in stack.candidates])  # (N, H, W)
    valid = np.stack([c.valid for c in stack.candidates])
    n_valid = valid.sum(axis=0)  # (H, W)
    padded = np.where(valid, values, np.inf)
    padded.sort(axis=0)
    # indices of the two middle order statistics among the first n_valid entries
    safe_n = np.maximum(n_valid, 1)
    lo = (safe_n - 1) // 2
    hi = safe_n // 2
    v_lo = np.take_along_axis(padded, lo[None, :, :], axis=0)[0]
    v_hi = np.take_along_axis(padded, hi[None, :, :], axis=0)[0]
    fused = (v_lo + v_hi) / 2.0
    dead = n_valid == 0
    if np.any(dead):
        if fallback is None:
            raise ValueError("pixels without any valid candidate and no fallback map")
        fused = np.where(dead, fallback, fused)
    return FusedMap(RasterPlane(fused[:, :, None]))


def propagate_to_member(
    key_fused: FusedMap,
    flow: FlowField,
    member_maps: list[RasterPlane],
) -> FusedMap:
    """Warp the key's fused map into a member frame; correspondence-dead pixels
    fall back to the member's own per-pixel mean raw saliency."""
    warped = warp_map(key_fused.values, flow)
    fallback = _mean_of_maps(member_maps)
    if fallback.shape != warped.valid.shape:
        raise ValueError("member maps do not match the flow's target frame")
    out = np.where(warped.valid, warped.values.plane(), fallback)
    return FusedMap(RasterPlane(out[:, :, None]))


def fuse_sub_group(
    member_ids: list[str],
    key_id: str,
    maps: dict[str, list[RasterPlane]],
    manifest: PairManifest | None,
) -> dict[str, FusedMap]:
    """Fuse one sub-group end to end: median fusion in the key frame, then
    decentralized propagation to every member. Returns one fused map per image."""
    sub_maps = {i: maps[i] for i in member_ids}
    candidates = warp_into_key(sub_maps, key_id, manifest)
    stack = CandidateStack(key_id=key_id, candidates=candidates)
    key_fused = median_fuse(stack, fallback=_mean_of_maps(maps[key_id]))
    fused: dict[str, FusedMap] = {key_id: key_fused}
    for image_id in member_ids:
        if image_id == key_id:
            continue
        if manifest is None:
            raise ConfigurationError(f"pair-manifest has no flow for pair {key_id} -> {image_id}")
        flow = manifest.flow(key_id, image_id)
        fused[image_id] = propagate_to_member(key_fused, flow, maps[image_id])
    return fused
