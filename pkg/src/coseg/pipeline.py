"""End-to-end orchestration: grouping -> fusion -> segmentation, as composable
stages that communicate through files in the output directory. `run` is literally
the three stages back to back, so staged and monolithic execution are identical."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import ConfigurationError
from .evaluate import IMAGE_EXTS
from .fusion import FusedMap, fuse_sub_group
from .graphcut import GrabCut, otsu_threshold, seeds_from_otsu
from .grouping import SubGrouping, fallback_features, load_features, select_k
from .raster import PairManifest, RasterPlane, load_image, load_saliency, save_mask

GROUPING_FILE = "grouping.txt"
REQUIRED_PAIRS_FILE = "required_pairs.txt"
FUSED_DIR = "fused"


@dataclass
class PipelineConfig:
    input_dir: str = ""
    saliency_dirs: list[str] = field(default_factory=list)
    flow_manifest: str = ""
    output_dir: str = ""
    features_file: str | None = None
    k_min: int | None = None
    k_max: int | None = None
    gc_iters: int = 5
    gc_gamma: float = 50.0
    gc_components: int = 5
    seed: int = 0
    dump_fused: str | None = None


_INT_KEYS = {"k_min", "k_max", "gc_iters", "gc_components", "seed"}
_FLOAT_KEYS = {"gc_gamma"}


def load_config(path=None, overrides: dict | None = None) -> PipelineConfig:
    """Build a config from a flat key=value file, with overrides (CLI flags) winning."""
    cfg = PipelineConfig()
    pairs: dict[str, str] = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigurationError(f"{path}:{lineno}: expected key=value")
                key, value = line.split("=", 1)
                pairs[key.strip()] = value.strip()
    for key, value in {**pairs, **(overrides or {})}.items():
        if value is None:
            continue
        if not hasattr(cfg, key):
            raise ConfigurationError(f"unknown config key {key!r}")
        if key == "saliency_dirs" and isinstance(value, str):
            value = [d for d in value.split(",") if d]
        elif key in _INT_KEYS and value != "":
            value = int(value)
        elif key in _FLOAT_KEYS:
            value = float(value)
        setattr(cfg, key, value)
    return cfg


def list_images(cfg: PipelineConfig) -> dict[str, str]:
    """image_id -> path for every image in the input directory."""
    if not os.path.isdir(cfg.input_dir):
        raise ConfigurationError(f"input_dir does not exist: {cfg.input_dir!r}")
    out = {}
    for fn in sorted(os.listdir(cfg.input_dir)):
        path = os.path.join(cfg.input_dir, fn)
        if os.path.isfile(path) and fn.lower().endswith(IMAGE_EXTS):
            out[os.path.splitext(fn)[0]] = path
    if not out:
        raise ConfigurationError(f"no images found in {cfg.input_dir!r}")
    return out


def validate_inputs(cfg: PipelineConfig) -> dict[str, str]:
    """Fail-fast check of every artifact the run will need; returns the image map."""
    images = list_images(cfg)
    if not cfg.saliency_dirs:
        raise ConfigurationError("no saliency_dirs configured")
    missing = []
    for sdir in cfg.saliency_dirs:
        for image_id in images:
            p = os.path.join(sdir, image_id + ".png")
            if not os.path.isfile(p):
                missing.append(p)
    if missing:
        raise ConfigurationError("missing saliency maps: " + ", ".join(missing))
    if cfg.features_file and not os.path.isfile(cfg.features_file):
        raise ConfigurationError(f"features file does not exist: {cfg.features_file!r}")
    if cfg.flow_manifest and not os.path.isfile(cfg.flow_manifest):
        raise ConfigurationError(f"flow manifest does not exist: {cfg.flow_manifest!r}")
    if not cfg.output_dir:
        raise ConfigurationError("output_dir is not configured")
    return images


def _grouping_features(cfg: PipelineConfig, images: dict[str, str]):
    if cfg.features_file:
        feats = load_features(cfg.features_file)
        by_id = {os.path.splitext(f.image_id)[0]: f for f in feats}
        missing = sorted(set(images) - set(by_id))
        if missing:
            raise ConfigurationError(f"features file lacks entries for: {', '.join(missing)}")
        from .grouping import FeatureVector

        return [FeatureVector(i, by_id[i].values) for i in sorted(images)]
    return [fallback_features(load_image(path), i) for i, path in sorted(images.items())]


def required_pairs(grouping: SubGrouping) -> list[tuple[str, str]]:
    """Member<->key ordered pairs the fusion stage will warp along."""
    pairs = []
    for label, key in sorted(grouping.key_images.items()):
        for member in grouping.members(label):
            if member != key:
                pairs.append((member, key))
                pairs.append((key, member))
    return pairs


def write_grouping(grouping: SubGrouping, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for label in range(1, grouping.k + 1):
            f.write(f"SUBGROUP {label} KEY {grouping.key_images[label]}\n")
            for member in grouping.members(label):
                f.write(f"MEMBER {label} {member}\n")


def read_grouping(path) -> SubGrouping:
    if not os.path.isfile(path):
        raise ConfigurationError(f"grouping manifest not found: {path!r} (run `cluster` first)")
    assignment: dict[str, int] = {}
    keys: dict[int, str] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "SUBGROUP":
                keys[int(parts[1])] = parts[3]
            elif parts[0] == "MEMBER":
                assignment[parts[2]] = int(parts[1])
    k = max(keys) if keys else 0
    return SubGrouping(k=k, assignment=assignment, centroids=np.zeros((k, 0)), key_images=keys)


def cluster_stage(cfg: PipelineConfig) -> SubGrouping:
    """Group the images, pick keys, and emit the run manifest plus the list of
    flow pairs the next stage will require."""
    images = validate_inputs(cfg)
    features = _grouping_features(cfg, images)
    grouping = select_k(features, cfg.k_min, cfg.k_max, cfg.seed)
    os.makedirs(cfg.output_dir, exist_ok=True)
    write_grouping(grouping, os.path.join(cfg.output_dir, GROUPING_FILE))
    with open(os.path.join(cfg.output_dir, REQUIRED_PAIRS_FILE), "w", encoding="utf-8") as f:
        for src, tgt in required_pairs(grouping):
            f.write(f"{src} {tgt}\n")
    return grouping


def _save_fused(fused: FusedMap, path, bits: int = 16) -> None:
    arr = fused.values.plane()
    if bits == 16:
        img = Image.fromarray(np.floor(arr * 65535 + 0.5).astype(np.uint16))
    else:
        img = Image.fromarray(np.floor(arr * 255 + 0.5).astype(np.uint8), mode="L")
    img.save(path, "PNG")


def fuse_stage(cfg: PipelineConfig) -> None:
    """Fuse every sub-group and write per-image fused maps (lossy only at 16-bit
    quantization, which the segment stage consumes identically in-run and staged)."""
    images = validate_inputs(cfg)
    grouping = read_grouping(os.path.join(cfg.output_dir, GROUPING_FILE))
    manifest = PairManifest.read(cfg.flow_manifest) if cfg.flow_manifest else None
    needed = required_pairs(grouping)
    absent = [p for p in needed if manifest is None or not manifest.has(*p)]
    if absent:
        listing = ", ".join(f"{s}->{t}" for s, t in absent)
        raise ConfigurationError(f"pair-manifest lacks required flows: {listing}")
    dims = {}
    for image_id, path in images.items():
        with Image.open(path) as img:
            dims[image_id] = img.size  # (w, h)
    maps = {
        image_id: [
            load_saliency(os.path.join(sdir, image_id + ".png"), *dims[image_id])
            for sdir in cfg.saliency_dirs
        ]
        for image_id in images
    }
    fused_dir = os.path.join(cfg.output_dir, FUSED_DIR)
    os.makedirs(fused_dir, exist_ok=True)
    if cfg.dump_fused:
        os.makedirs(cfg.dump_fused, exist_ok=True)
    for label in range(1, grouping.k + 1):
        members = grouping.members(label)
        fused = fuse_sub_group(members, grouping.key_images[label], maps, manifest)
        for image_id, fmap in fused.items():
            _save_fused(fmap, os.path.join(fused_dir, image_id + ".png"), bits=16)
            if cfg.dump_fused:
                _save_fused(fmap, os.path.join(cfg.dump_fused, image_id + ".png"), bits=8)


def segment_stage(cfg: PipelineConfig) -> None:
    """Fused maps -> Otsu seeds -> GrabCut -> mask PNGs in the output directory."""
    images = validate_inputs(cfg)
    fused_dir = os.path.join(cfg.output_dir, FUSED_DIR)
    missing = [i for i in images if not os.path.isfile(os.path.join(fused_dir, i + ".png"))]
    if missing:
        raise ConfigurationError(
            "fused maps missing (run `fuse` first): " + ", ".join(sorted(missing))
        )
    for image_id, path in sorted(images.items()):
        image = load_image(path)
        fused = FusedMap(
            load_saliency(os.path.join(fused_dir, image_id + ".png"), image.width, image.height)
        )
        t = otsu_threshold(fused)
        trimap = seeds_from_otsu(fused, t)
        engine = GrabCut(
            iterations=cfg.gc_iters,
            components=cfg.gc_components,
            gamma=cfg.gc_gamma,
            seed=cfg.seed,
        )
        mask = engine.segment(image, trimap)
        save_mask(mask, os.path.join(cfg.output_dir, image_id + ".png"))


def run_pipeline(cfg: PipelineConfig) -> None:
    """Full Fig-1-style run: cluster, fuse, segment, via the same on-disk stages."""
    validate_inputs(cfg)
    cluster_stage(cfg)
    fuse_stage(cfg)
    segment_stage(cfg)
