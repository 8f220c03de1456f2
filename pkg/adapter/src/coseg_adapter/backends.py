"""Model backends behind string specs.

Saliency: `spectral:<scale>` (weight-free spectral-residual detector) or
`torchscript:<path>` (exported detector, 1x3xHxW in, 1x1xhxw out).
Flow: `zero` (identity correspondence) or `torchscript:<path>`
(source+target in, 1x2xHxW displacement out at target resolution).
Features: `resnet50:<seed>` (seeded untrained torchvision backbone, global
average pool, D=2048) or `torchscript:<path>` (1xD out).

The torchscript variants are the hook for real pretrained exports; the
weight-free variants keep the adapter runnable and testable without any
downloaded weights.
"""

from __future__ import annotations

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter, uniform_filter


class AdapterError(RuntimeError):
    """A backend could not be loaded or failed during inference."""


def _resize(arr: np.ndarray, w: int, h: int) -> np.ndarray:
    img = Image.fromarray(arr.astype(np.float32), mode="F")
    return np.asarray(img.resize((w, h), Image.BILINEAR), dtype=np.float64)


def _minmax(arr: np.ndarray) -> np.ndarray:
    lo, hi = float(arr.min()), float(arr.max())
    if hi <= lo:
        return np.zeros_like(arr)
    return (arr - lo) / (hi - lo)


class SpectralResidualSaliency:
    """Classic spectral-residual saliency: suppress the smooth part of the
    log amplitude spectrum and measure what remains."""

    def __init__(self, scale: int = 64):
        if scale < 8:
            raise AdapterError(f"spectral scale too small: {scale}")
        self.scale = scale

    def __call__(self, rgb: np.ndarray) -> np.ndarray:
        h, w = rgb.shape[:2]
        gray = rgb.mean(axis=2)
        small = _resize(gray, self.scale, self.scale)
        spectrum = np.fft.fft2(small)
        log_amp = np.log(np.abs(spectrum) + 1e-12)
        residual = log_amp - uniform_filter(log_amp, size=3, mode="wrap")
        phase = np.angle(spectrum)
        sal = np.abs(np.fft.ifft2(np.exp(residual + 1j * phase))) ** 2
        sal = gaussian_filter(sal, sigma=2.5)
        return _minmax(_resize(sal, w, h))


class TorchScriptSaliency:
    def __init__(self, path: str):
        import torch

        try:
            self.module = torch.jit.load(path, map_location="cpu").eval()
        except Exception as e:
            raise AdapterError(f"saliency model load failed ({path}): {e}") from e

    def __call__(self, rgb: np.ndarray) -> np.ndarray:
        import torch

        h, w = rgb.shape[:2]
        x = torch.from_numpy(rgb.transpose(2, 0, 1)[None]).float()
        with torch.no_grad():
            out = self.module(x)
        sal = out.squeeze().numpy().astype(np.float64)
        if sal.ndim != 2:
            raise AdapterError(f"saliency model emitted shape {tuple(out.shape)}")
        if sal.shape != (h, w):
            sal = _resize(sal, w, h)
        return _minmax(sal)


class ZeroFlow:
    """Identity correspondence: every target pixel maps to itself."""

    def __call__(self, source_rgb: np.ndarray, target_rgb: np.ndarray):
        h, w = target_rgb.shape[:2]
        z = np.zeros((h, w), dtype=np.float32)
        return z, z.copy()


class TorchScriptFlow:
    def __init__(self, path: str):
        import torch

        try:
            self.module = torch.jit.load(path, map_location="cpu").eval()
        except Exception as e:
            raise AdapterError(f"flow model load failed ({path}): {e}") from e

    def __call__(self, source_rgb: np.ndarray, target_rgb: np.ndarray):
        import torch

        h, w = target_rgb.shape[:2]
        src = torch.from_numpy(source_rgb.transpose(2, 0, 1)[None]).float()
        tgt = torch.from_numpy(target_rgb.transpose(2, 0, 1)[None]).float()
        with torch.no_grad():
            out = self.module(src, tgt)
        flow = out.squeeze(0).numpy().astype(np.float64)
        if flow.shape[0] != 2:
            raise AdapterError(f"flow model emitted shape {tuple(out.shape)}")
        du, dv = flow[0], flow[1]
        if du.shape != (h, w):
            # network-resolution output: resample and rescale displacements
            sx, sy = w / du.shape[1], h / du.shape[0]
            du = _resize(du, w, h) * sx
            dv = _resize(dv, w, h) * sy
        return du.astype(np.float32), dv.astype(np.float32)


class ResNet50Features:
    """Global-average-pooled final-stage features (D=2048) from a seeded
    torchvision ResNet50. With no pretrained weights on disk the seed makes
    the backbone a fixed random projection, which is still a deterministic,
    format-correct global descriptor."""

    INPUT_SIZE = 224
    DIM = 2048

    def __init__(self, seed: int = 0):
        import torch
        from torchvision.models import resnet50

        torch.manual_seed(seed)
        model = resnet50(weights=None).eval()
        self.trunk = torch.nn.Sequential(*list(model.children())[:-1]).eval()

    def __call__(self, rgb: np.ndarray) -> np.ndarray:
        import torch

        img = Image.fromarray(np.floor(rgb * 255 + 0.5).astype(np.uint8), mode="RGB")
        img = img.resize((self.INPUT_SIZE, self.INPUT_SIZE), Image.BILINEAR)
        x = torch.from_numpy(
            np.asarray(img, dtype=np.float32).transpose(2, 0, 1)[None] / 255.0
        )
        with torch.no_grad():
            feat = self.trunk(x)
        return feat.squeeze().numpy().astype(np.float64)


class TorchScriptFeatures:
    def __init__(self, path: str):
        import torch

        try:
            self.module = torch.jit.load(path, map_location="cpu").eval()
        except Exception as e:
            raise AdapterError(f"feature model load failed ({path}): {e}") from e

    def __call__(self, rgb: np.ndarray) -> np.ndarray:
        import torch

        x = torch.from_numpy(rgb.transpose(2, 0, 1)[None]).float()
        with torch.no_grad():
            out = self.module(x)
        return out.squeeze().numpy().astype(np.float64).ravel()


def _split_spec(spec: str) -> tuple[str, str]:
    kind, _, arg = spec.partition(":")
    return kind, arg


def make_saliency_backend(spec: str):
    kind, arg = _split_spec(spec)
    if kind == "spectral":
        return SpectralResidualSaliency(int(arg) if arg else 64)
    if kind == "torchscript":
        return TorchScriptSaliency(arg)
    raise AdapterError(f"unknown saliency backend {spec!r}")


def make_flow_backend(spec: str):
    kind, arg = _split_spec(spec)
    if kind == "zero":
        return ZeroFlow()
    if kind == "torchscript":
        return TorchScriptFlow(arg)
    raise AdapterError(f"unknown flow backend {spec!r}")


def make_feature_backend(spec: str):
    kind, arg = _split_spec(spec)
    if kind == "resnet50":
        return ResNet50Features(int(arg) if arg else 0)
    if kind == "torchscript":
        return TorchScriptFeatures(arg)
    raise AdapterError(f"unknown feature backend {spec!r}")
