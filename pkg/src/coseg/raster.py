"""Core raster types and bit-exact file I/O for images, saliency maps, masks and flows."""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ConfigurationError, FormatError
from ._interp import resize_bilinear

FLO_MAGIC = 202021.25
SENTINEL_THRESHOLD = 1e9  # |du| or |dv| beyond this marks "no correspondence"


@dataclass(frozen=True)
class RasterPlane:
    """H x W x C grid of scalars in [0,1]; the universal pixel container."""

    data: np.ndarray  # shape (H, W, C), float64

    def __post_init__(self):
        a = np.asarray(self.data, dtype=np.float64)
        if a.ndim == 2:
            a = a[:, :, None]
        if a.ndim != 3 or a.shape[2] not in (1, 3):
            raise ValueError(f"raster must be HxWx1 or HxWx3, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("raster values must be finite")
        if a.min() < 0.0 or a.max() > 1.0:
            raise ValueError("raster values must lie in [0,1]")
        a = a.copy()
        a.flags.writeable = False
        object.__setattr__(self, "data", a)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def plane(self) -> np.ndarray:
        """The single channel as an (H, W) view; only valid for channels == 1."""
        if self.channels != 1:
            raise ValueError("plane() requires a single-channel raster")
        return self.data[:, :, 0]


@dataclass(frozen=True)
class BinaryMask:
    """H x W boolean grid, True = foreground."""

    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits, dtype=bool)
        if b.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {b.shape}")
        b = b.copy()
        b.flags.writeable = False
        object.__setattr__(self, "bits", b)

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]


@dataclass(frozen=True)
class FlowField:
    """Per-target-pixel source-coordinate displacements (backward-warp convention)."""

    du: np.ndarray  # (H, W) float32, horizontal displacement in source pixels
    dv: np.ndarray  # (H, W) float32, vertical displacement
    source_width: int
    source_height: int

    def __post_init__(self):
        du = np.asarray(self.du, dtype=np.float32).copy()
        dv = np.asarray(self.dv, dtype=np.float32).copy()
        if du.ndim != 2 or du.shape != dv.shape:
            raise ValueError("du/dv must be 2-D grids of identical shape")
        if not (np.all(np.isfinite(du)) and np.all(np.isfinite(dv))):
            raise ValueError("flow displacements must be finite (use the sentinel for gaps)")
        du.flags.writeable = False
        dv.flags.writeable = False
        object.__setattr__(self, "du", du)
        object.__setattr__(self, "dv", dv)

    @property
    def height(self) -> int:
        return self.du.shape[0]

    @property
    def width(self) -> int:
        return self.du.shape[1]

    @classmethod
    def identity(cls, width: int, height: int) -> "FlowField":
        z = np.zeros((height, width), dtype=np.float32)
        return cls(du=z, dv=z.copy(), source_width=width, source_height=height)


def load_image(path) -> RasterPlane:
    """Load a PNG or JPEG as a 3-channel raster scaled to [0,1]."""
    try:
        with Image.open(path) as img:
            fmt = img.format
            if fmt not in ("PNG", "JPEG"):
                raise FormatError(f"{path}: unsupported image format {fmt!r}")
            rgb = img.convert("RGB")
            arr = np.asarray(rgb, dtype=np.float64) / 255.0
    except UnidentifiedImageError as e:
        raise FormatError(f"{path}: not a recognized image file") from e
    return RasterPlane(arr)


def _gray_array(img: Image.Image, path) -> np.ndarray:
    """Single-channel pixel data scaled to [0,1]; rejects multi-channel input."""
    if img.mode == "L":
        return np.asarray(img, dtype=np.float64) / 255.0
    if img.mode in ("I", "I;16", "I;16B", "I;16L"):
        return np.asarray(img, dtype=np.float64) / 65535.0
    raise FormatError(f"{path}: expected single-channel PNG, got mode {img.mode!r}")


def load_saliency(path, target_w: int, target_h: int) -> RasterPlane:
    """Load a single-channel saliency PNG, bilinearly resampled to the target size."""
    try:
        with Image.open(path) as img:
            if img.format != "PNG":
                raise FormatError(f"{path}: saliency maps must be PNG, got {img.format!r}")
            arr = _gray_array(img, path)
    except UnidentifiedImageError as e:
        raise FormatError(f"{path}: not a recognized image file") from e
    arr = resize_bilinear(arr, target_w, target_h)
    return RasterPlane(np.clip(arr, 0.0, 1.0))


def load_flow(path, source_size: tuple[int, int] | None = None) -> FlowField:
    """Read a Middlebury .flo file.

    source_size is (width, height) of the source frame, normally supplied by the
    pair-manifest; defaults to the flow's own (target) dimensions.
    """
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 12:
        raise FormatError(f"{path}: truncated .flo header")
    magic = struct.unpack("<f", raw[0:4])[0]
    if magic != FLO_MAGIC:
        raise FormatError(f"{path}: bad .flo magic number {magic!r}")
    w, h = struct.unpack("<ii", raw[4:12])
    if w <= 0 or h <= 0:
        raise FormatError(f"{path}: invalid .flo dimensions {w}x{h}")
    expected = 12 + 8 * w * h
    if len(raw) != expected:
        raise FormatError(f"{path}: .flo size mismatch ({len(raw)} bytes, expected {expected})")
    data = np.frombuffer(raw, dtype="<f4", offset=12).reshape(h, w, 2)
    sw, sh = source_size if source_size is not None else (w, h)
    return FlowField(du=data[:, :, 0], dv=data[:, :, 1], source_width=sw, source_height=sh)


def save_flow(flow: FlowField, path) -> None:
    """Write a FlowField as a Middlebury .flo file (bit-exact round trip)."""
    with open(path, "wb") as f:
        f.write(struct.pack("<f", FLO_MAGIC))
        f.write(struct.pack("<ii", flow.width, flow.height))
        interleaved = np.stack([flow.du, flow.dv], axis=-1).astype("<f4")
        f.write(interleaved.tobytes())


def save_mask(mask: BinaryMask, path) -> None:
    """Write a mask as an 8-bit gray PNG, foreground=255."""
    arr = np.where(mask.bits, 255, 0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path, format="PNG")


def load_mask(path) -> BinaryMask:
    """Load a mask PNG; any nonzero pixel is foreground."""
    try:
        with Image.open(path) as img:
            arr = np.asarray(img.convert("L"))
    except UnidentifiedImageError as e:
        raise FormatError(f"{path}: not a recognized image file") from e
    return BinaryMask(arr > 0)


@dataclass(frozen=True)
class ManifestEntry:
    flo_path: str
    source_width: int
    source_height: int


@dataclass
class PairManifest:
    """Ordered-pair index of on-disk flow files.

    Line format: `<source_image> <target_image> <flo_path> <source_w> <source_h>`.
    Relative .flo paths are resolved against the manifest's directory.
    """

    entries: dict[tuple[str, str], ManifestEntry] = field(default_factory=dict)

    @classmethod
    def read(cls, path) -> "PairManifest":
        base = os.path.dirname(os.path.abspath(path))
        entries = {}
        with open(path, "r", encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.split()
                if len(parts) != 5:
                    raise FormatError(f"{path}:{lineno}: expected 5 fields, got {len(parts)}")
                src, tgt, flo, sw, sh = parts
                if not os.path.isabs(flo):
                    flo = os.path.join(base, flo)
                entries[(src, tgt)] = ManifestEntry(flo, int(sw), int(sh))
        return cls(entries)

    def has(self, source: str, target: str) -> bool:
        return (source, target) in self.entries

    def flow(self, source: str, target: str) -> FlowField:
        try:
            e = self.entries[(source, target)]
        except KeyError:
            raise ConfigurationError(
                f"pair-manifest has no flow for pair {source} -> {target}"
            ) from None
        return load_flow(e.flo_path, source_size=(e.source_width, e.source_height))


def write_manifest_line(source: str, target: str, flo_path: str, sw: int, sh: int) -> str:
    return f"{source} {target} {flo_path} {sw} {sh}"
