"""Dense backward warping of saliency maps along flow fields, with per-pixel validity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .raster import FlowField, PairManifest, RasterPlane, SENTINEL_THRESHOLD
from ._interp import bilinear_sample


@dataclass(frozen=True)
class WarpedMap:
    """A single-channel map resampled into a target frame plus a validity grid.

    Invalid pixels (correspondence landed outside the source, or sentinel
    displacement) carry value 0 and must be excluded from fusion.
    """

    values: RasterPlane
    valid: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.valid, dtype=bool)
        if v.shape != (self.values.height, self.values.width):
            raise ValueError("valid grid must match map dimensions")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "valid", v)


def warp_map(source_map: RasterPlane, flow: FlowField) -> WarpedMap:
    """Backward-warp a single-channel map into the flow's target frame.

    Each target pixel (x, y) samples the source at (x+du, y+dv) bilinearly.
    A sample is valid when the displacement is not the sentinel and the sample
    center lies within [-0.5, W-0.5] x [-0.5, H-0.5]; the neighbor fetch at the
    boundary clamps.
    """
    if source_map.channels != 1:
        raise ValueError("warp_map expects a single-channel map")
    if (source_map.width, source_map.height) != (flow.source_width, flow.source_height):
        raise ValueError(
            f"source map is {source_map.width}x{source_map.height} but flow declares "
            f"source {flow.source_width}x{flow.source_height}"
        )
    h, w = flow.height, flow.width
    gx, gy = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    du = flow.du.astype(np.float64)
    dv = flow.dv.astype(np.float64)
    sentinel = (np.abs(du) > SENTINEL_THRESHOLD) | (np.abs(dv) > SENTINEL_THRESHOLD)
    sx = gx + np.where(sentinel, 0.0, du)
    sy = gy + np.where(sentinel, 0.0, dv)
    sw, sh = source_map.width, source_map.height
    inside = (sx >= -0.5) & (sx <= sw - 0.5) & (sy >= -0.5) & (sy <= sh - 0.5)
    valid = inside & ~sentinel
    sampled = bilinear_sample(source_map.plane(), sx, sy)
    values = np.where(valid, np.clip(sampled, 0.0, 1.0), 0.0)
    return WarpedMap(values=RasterPlane(values[:, :, None]), valid=valid)


def warp_into_key(
    sub_group_maps: dict[str, list[RasterPlane]],
    key_id: str,
    manifest: PairManifest | None,
) -> list[WarpedMap]:
    """Collect all candidate maps for a key image: every member's maps warped into
    the key frame, the key's own maps via the implicit identity flow.

    Returns exactly L * |G_k| maps, ordered by (image_id, source index).
    """
    if key_id not in sub_group_maps:
        raise ValueError(f"key image {key_id!r} is not in the sub-group")
    key_maps = sub_group_maps[key_id]
    identity = FlowField.identity(key_maps[0].width, key_maps[0].height)
    candidates: list[WarpedMap] = []
    for image_id in sorted(sub_group_maps):
        if image_id == key_id:
            flow = identity
        else:
            if manifest is None or not manifest.has(image_id, key_id):
                raise ConfigurationError(
                    f"pair-manifest has no flow for pair {image_id} -> {key_id}"
                )
            flow = manifest.flow(image_id, key_id)
        for source_map in sub_group_maps[image_id]:
            candidates.append(warp_map(source_map, flow))
    return candidates
