"""On-disk formats shared with the pipeline: 8-bit gray PNG saliency maps,
Middlebury .flo flow fields, whitespace feature lines, and pair-manifest lines."""

from __future__ import annotations

import os
import struct

import numpy as np
from PIL import Image

FLO_MAGIC = 202021.25
IMAGE_EXTS = (".png", ".jpg", ".jpeg")


def load_image_rgb(path) -> np.ndarray:
    """(H, W, 3) float64 in [0, 1]."""
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0


def save_gray_png(arr: np.ndarray, path) -> None:
    """Write a [0,1] map as an 8-bit single-channel PNG."""
    a = np.clip(np.asarray(arr, dtype=np.float64), 0.0, 1.0)
    Image.fromarray(np.floor(a * 255 + 0.5).astype(np.uint8), mode="L").save(path, "PNG")


def save_flo(du: np.ndarray, dv: np.ndarray, path) -> None:
    """Write a flow field in Middlebury .flo layout (little-endian, interleaved)."""
    h, w = du.shape
    with open(path, "wb") as f:
        f.write(struct.pack("<f", FLO_MAGIC))
        f.write(struct.pack("<ii", w, h))
        f.write(np.stack([du, dv], axis=-1).astype("<f4").tobytes())


def write_feature_file(features: dict[str, np.ndarray], path) -> None:
    """One `<image_id> <v1> ... <vD>` line per image, 6-decimal floats, sorted by id."""
    with open(path, "w", encoding="utf-8") as f:
        for image_id in sorted(features):
            vals = " ".join(f"{v:.6f}" for v in features[image_id])
            f.write(f"{image_id} {vals}\n")


def manifest_line(source: str, target: str, flo_path: str, sw: int, sh: int) -> str:
    return f"{source} {target} {flo_path} {sw} {sh}"


def list_images(images_dir) -> dict[str, str]:
    """image_id (stem) -> path for every image in a directory."""
    images_dir = os.fspath(images_dir)
    if not os.path.isdir(images_dir):
        raise FileNotFoundError(f"images directory does not exist: {images_dir!r}")
    out = {}
    for fn in sorted(os.listdir(images_dir)):
        if fn.lower().endswith(IMAGE_EXTS):
            out[os.path.splitext(fn)[0]] = os.path.join(images_dir, fn)
    if not out:
        raise FileNotFoundError(f"no images found in {images_dir!r}")
    return out


def read_pairs(path) -> list[tuple[str, str]]:
    """Required ordered pairs, one `<source_id> <target_id>` per line."""
    pairs = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected `<source> <target>`")
            pairs.append((parts[0], parts[1]))
    return pairs
