"""Bilinear sampling shared by the resampler and the flow warper."""

import numpy as np


def bilinear_sample(grid: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Sample a 2-D grid at fractional coordinates with clamped neighbor fetch.

    Pixel centers sit at integer coordinates. Coordinates outside the grid are
    the caller's business (validity is decided upstream); the four-neighbor
    fetch itself is clamped to the grid so boundary samples stay well-defined.
    """
    h, w = grid.shape
    x0 = np.floor(x)
    y0 = np.floor(y)
    fx = x - x0
    fy = y - y0
    x0 = x0.astype(np.intp)
    y0 = y0.astype(np.intp)
    x0c = np.clip(x0, 0, w - 1)
    x1c = np.clip(x0 + 1, 0, w - 1)
    y0c = np.clip(y0, 0, h - 1)
    y1c = np.clip(y0 + 1, 0, h - 1)
    v00 = grid[y0c, x0c]
    v01 = grid[y0c, x1c]
    v10 = grid[y1c, x0c]
    v11 = grid[y1c, x1c]
    top = v00 * (1.0 - fx) + v01 * fx
    bot = v10 * (1.0 - fx) + v11 * fx
    return top * (1.0 - fy) + bot * fy


def resize_bilinear(grid: np.ndarray, target_w: int, target_h: int) -> np.ndarray:
    """Corner-aligned bilinear resize of a 2-D grid."""
    h, w = grid.shape
    if (w, h) == (target_w, target_h):
        return grid.copy()
    xs = np.linspace(0.0, w - 1.0, target_w) if target_w > 1 else np.zeros(1)
    ys = np.linspace(0.0, h - 1.0, target_h) if target_h > 1 else np.zeros(1)
    gx, gy = np.meshgrid(xs, ys)
    return bilinear_sample(grid, gx, gy)
