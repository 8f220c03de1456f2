"""Desk-scale synthetic fixture: a group of images sharing a translated colored
ellipse over per-image textured backgrounds, with exact ground truth, noisy
saliency maps per source, exact translation flow fields, and a pair-manifest.

Each saliency source additionally carries one small content-anchored spurious
high-saliency disc at a source-specific background spot. A single source fuses
it into a hard foreground seed; the cross-source median rejects it, which is
what makes multi-source fusion measurably better than any single source here.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter

from .raster import BinaryMask, FlowField, save_flow, save_mask, write_manifest_line

FG_COLOR = np.array([0.78, 0.18, 0.15])
BG_COLOR = np.array([0.18, 0.50, 0.30])
DECOY_VALUE = 0.95
DECOY_RADIUS = 3
NOISE_HALF_RANGE = 0.05  # saliency noise, 0.1 peak to peak
BLUR_SIGMA = 2.0


@dataclass
class SyntheticGroup:
    root: str
    image_dir: str
    gt_dir: str
    saliency_dirs: list[str]
    manifest_path: str
    config_path: str
    image_ids: list[str]


def _ellipse_mask(size: int, cx: float, cy: float, rx: float, ry: float) -> np.ndarray:
    ys, xs = np.mgrid[0:size, 0:size]
    return ((xs - cx) / rx) ** 2 + ((ys - cy) / ry) ** 2 <= 1.0


def _save_gray(arr: np.ndarray, path: str) -> None:
    Image.fromarray(np.floor(arr * 255 + 0.5).astype(np.uint8), mode="L").save(path, "PNG")


def _save_rgb(arr: np.ndarray, path: str) -> None:
    Image.fromarray(np.floor(arr * 255 + 0.5).astype(np.uint8), mode="RGB").save(path, "PNG")


def _decoy_positions(
    rng: np.random.Generator,
    n_sources: int,
    size: int,
    cx: float,
    cy: float,
    rx: float,
    ry: float,
    offsets: list[tuple[int, int]],
) -> list[tuple[int, int]]:
    """Background spots, clear of the ellipse, inside every image, mutually apart."""
    margin = DECOY_RADIUS + 2
    # preferred clearance is the disc radius plus the blur tail of the ellipse;
    # small images progressively relax it so a spot always exists
    for clearance in (DECOY_RADIUS + 4, DECOY_RADIUS + 2, DECOY_RADIUS, 1):
        candidates = [
            (x, y)
            for x in range(margin, size - margin)
            for y in range(margin, size - margin)
            if ((x - cx) / (rx + clearance)) ** 2 + ((y - cy) / (ry + clearance)) ** 2 > 1.0
            and all(
                margin <= x + ox < size - margin and margin <= y + oy < size - margin
                for ox, oy in offsets
            )
        ]
        if candidates:
            break
    if not candidates:
        raise RuntimeError("could not place a decoy spot; image too small for the config")
    order = list(rng.permutation(len(candidates)))
    separation = 4 * DECOY_RADIUS
    while separation >= 1:
        spots: list[tuple[int, int]] = []
        for i in order:
            x, y = candidates[i]
            if all(abs(x - sx) + abs(y - sy) >= separation for sx, sy in spots):
                spots.append((x, y))
                if len(spots) == n_sources:
                    return spots
        separation //= 2  # crowded layout: accept closer spots rather than fail
    # tiny image: fewer distinct spots than sources, reuse them cyclically
    return [candidates[order[i % len(order)]] for i in range(n_sources)]


def gen_synthetic(
    out_dir,
    group_size: int = 4,
    image_size: int = 64,
    sources: int = 4,
    corruption: int | None = None,
    shift: tuple[int, int] = (3, 0),
    seed: int = 0,
) -> SyntheticGroup:
    if group_size < 1 or sources < 1:
        raise ValueError("group_size and sources must be at least 1")
    if corruption is not None and not (0 <= corruption < sources):
        raise ValueError(f"corruption index {corruption} outside [0, {sources})")
    out = os.fspath(out_dir)
    image_dir = os.path.join(out, "dataset", "group")
    gt_dir = os.path.join(image_dir, "GT")
    flow_dir = os.path.join(out, "flows")
    sal_dirs = [os.path.join(out, "saliency", f"src{s}") for s in range(sources)]
    for d in [image_dir, gt_dir, flow_dir, *sal_dirs]:
        os.makedirs(d, exist_ok=True)

    rng = np.random.default_rng(seed)
    size = image_size
    sx, sy = shift
    offsets = [(i * sx, i * sy) for i in range(group_size)]
    rx, ry = size * 0.28, size * 0.20
    # center the offset sweep so the ellipse stays inside every image
    cx0 = size / 2 - (group_size - 1) * sx / 2
    cy0 = size / 2 - (group_size - 1) * sy / 2
    decoys = _decoy_positions(rng, sources, size, cx0, cy0, rx, ry, offsets)

    image_ids = [f"img_{i:03d}" for i in range(group_size)]
    for i, image_id in enumerate(image_ids):
        ox, oy = offsets[i]
        gt = _ellipse_mask(size, cx0 + ox, cy0 + oy, rx, ry)
        img = BG_COLOR + rng.uniform(-0.12, 0.12, (size, size, 3))
        fg = FG_COLOR + rng.uniform(-0.06, 0.06, (size, size, 3))
        img[gt] = fg[gt]
        _save_rgb(np.clip(img, 0.0, 1.0), os.path.join(image_dir, image_id + ".png"))
        save_mask(BinaryMask(gt), os.path.join(gt_dir, image_id + ".png"))

        blurred = gaussian_filter(gt.astype(np.float64), BLUR_SIGMA)
        for s in range(sources):
            m = blurred + rng.uniform(-NOISE_HALF_RANGE, NOISE_HALF_RANGE, (size, size))
            dx, dy = decoys[s]
            disc = _ellipse_mask(size, dx + ox, dy + oy, DECOY_RADIUS, DECOY_RADIUS)
            m[disc] = DECOY_VALUE
            m = np.clip(m, 0.0, 1.0)
            if corruption == s:
                m = 1.0 - m
            _save_gray(m, os.path.join(sal_dirs[s], image_id + ".png"))

    manifest_path = os.path.join(out, "manifest.txt")
    with open(manifest_path, "w", encoding="utf-8") as mf:
        for u, (ux, uy) in zip(image_ids, offsets):
            for v, (vx, vy) in zip(image_ids, offsets):
                if u == v:
                    continue
                du = np.full((size, size), ux - vx, dtype=np.float32)
                dv = np.full((size, size), uy - vy, dtype=np.float32)
                flo_rel = os.path.join("flows", f"{u}__{v}.flo")
                save_flow(
                    FlowField(du=du, dv=dv, source_width=size, source_height=size),
                    os.path.join(out, flo_rel),
                )
                mf.write(write_manifest_line(u, v, flo_rel, size, size) + "\n")

    config_path = os.path.join(out, "config.txt")
    with open(config_path, "w", encoding="utf-8") as cf:
        cf.write(f"input_dir={image_dir}\n")
        cf.write(f"saliency_dirs={','.join(sal_dirs)}\n")
        cf.write(f"flow_manifest={manifest_path}\n")
        cf.write(f"output_dir={os.path.join(out, 'predictions')}\n")
        cf.write(f"seed={seed}\n")

    return SyntheticGroup(
        root=out,
        image_dir=image_dir,
        gt_dir=gt_dir,
        saliency_dirs=sal_dirs,
        manifest_path=manifest_path,
        config_path=config_path,
        image_ids=image_ids,
    )
