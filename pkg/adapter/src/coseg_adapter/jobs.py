"""Batch jobs: saliency maps per source, flows per required pair, one feature
file per image set. All outputs are named by input basename so the pipeline
finds them without any mapping step."""

from __future__ import annotations

import os

from .backends import AdapterError, make_feature_backend, make_flow_backend, make_saliency_backend
from .fileio import (
    list_images,
    load_image_rgb,
    manifest_line,
    read_pairs,
    save_flo,
    save_gray_png,
    write_feature_file,
)

DEFAULT_SALIENCY_SOURCES = ["spectral:48", "spectral:64", "spectral:80", "spectral:96"]
DEFAULT_FLOW_MODEL = "zero"
DEFAULT_FEATURE_MODEL = "resnet50:0"


def run_saliency(images_dir, out_dir, source_specs=None) -> list[str]:
    """One subdirectory per source (src0, src1, ...), one map PNG per image."""
    specs = list(source_specs) if source_specs else list(DEFAULT_SALIENCY_SOURCES)
    images = list_images(images_dir)
    out_dirs = []
    for s, spec in enumerate(specs):
        try:
            backend = make_saliency_backend(spec)
        except AdapterError:
            raise
        except Exception as e:
            raise AdapterError(f"saliency source {s} ({spec!r}) failed to load: {e}") from e
        sdir = os.path.join(os.fspath(out_dir), f"src{s}")
        os.makedirs(sdir, exist_ok=True)
        for image_id, path in images.items():
            rgb = load_image_rgb(path)
            try:
                sal = backend(rgb)
            except AdapterError:
                raise
            except Exception as e:
                raise AdapterError(
                    f"saliency source {s} ({spec!r}) failed on {image_id}: {e}"
                ) from e
            save_gray_png(sal, os.path.join(sdir, image_id + ".png"))
        out_dirs.append(sdir)
    return out_dirs


def run_flows(images_dir, pairs_file, out_dir, model_spec=DEFAULT_FLOW_MODEL) -> str:
    """One .flo per required ordered pair plus a manifest covering exactly those
    pairs; returns the manifest path."""
    images = list_images(images_dir)
    pairs = read_pairs(pairs_file)
    unknown = sorted({i for pair in pairs for i in pair} - set(images))
    if unknown:
        raise AdapterError(f"pairs reference unknown images: {', '.join(unknown)}")
    backend = make_flow_backend(model_spec)
    out = os.fspath(out_dir)
    os.makedirs(out, exist_ok=True)
    lines = []
    for src_id, tgt_id in pairs:
        src = load_image_rgb(images[src_id])
        tgt = load_image_rgb(images[tgt_id])
        try:
            du, dv = backend(src, tgt)
        except AdapterError:
            raise
        except Exception as e:
            raise AdapterError(f"flow inference failed on pair {src_id} -> {tgt_id}: {e}") from e
        flo_name = f"{src_id}__{tgt_id}.flo"
        save_flo(du, dv, os.path.join(out, flo_name))
        sh, sw = src.shape[:2]
        lines.append(manifest_line(src_id, tgt_id, flo_name, sw, sh))
    manifest_path = os.path.join(out, "manifest.txt")
    with open(manifest_path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + ("\n" if lines else ""))
    return manifest_path


def run_features(images_dir, out_path, model_spec=DEFAULT_FEATURE_MODEL) -> str:
    """One global descriptor line per image, in the pipeline's feature format."""
    images = list_images(images_dir)
    backend = make_feature_backend(model_spec)
    feats = {}
    for image_id, path in images.items():
        feats[image_id] = backend(load_image_rgb(path))
    write_feature_file(feats, out_path)
    return os.fspath(out_path)
