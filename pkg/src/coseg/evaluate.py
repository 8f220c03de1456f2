"""Scoring of predicted masks against ground truth (Jaccard + pixel accuracy),
dataset directory loading, and report assembly."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError
from .raster import BinaryMask, load_mask

log = logging.getLogger(__name__)

IMAGE_EXTS = (".png", ".jpg", ".jpeg")


def jaccard(pred: BinaryMask, gt: BinaryMask) -> float:
    """Intersection over union; two empty masks score 1.0."""
    if pred.bits.shape != gt.bits.shape:
        raise ValueError(f"mask shapes differ: {pred.bits.shape} vs {gt.bits.shape}")
    union = np.count_nonzero(pred.bits | gt.bits)
    if union == 0:
        return 1.0
    inter = np.count_nonzero(pred.bits & gt.bits)
    return inter / union


def precision(pred: BinaryMask, gt: BinaryMask) -> float:
    """Fraction of pixels labeled the same in both masks (pixel accuracy)."""
    if pred.bits.shape != gt.bits.shape:
        raise ValueError(f"mask shapes differ: {pred.bits.shape} vs {gt.bits.shape}")
    return np.count_nonzero(pred.bits == gt.bits) / pred.bits.size


@dataclass
class DatasetGroup:
    name: str
    images: dict[str, str]  # image_id -> image path
    gt: dict[str, str]  # image_id -> ground-truth mask path (labeled images only)


@dataclass
class Dataset:
    root: str
    groups: list[DatasetGroup]


def _image_id(filename: str) -> str:
    return os.path.splitext(filename)[0]


def load_dataset(root) -> Dataset:
    """Load the class-directory convention: one subdirectory per class, images at
    the top level, ground truth in a `GT/` subdirectory keyed by basename.

    Images without (or with unreadable) ground truth are kept as unlabeled.
    """
    root = os.fspath(root)
    class_dirs = sorted(
        d for d in os.listdir(root) if os.path.isdir(os.path.join(root, d))
    )
    if not class_dirs:
        raise ValueError(f"{root}: no class directories found")
    groups = []
    for cls in class_dirs:
        cls_dir = os.path.join(root, cls)
        images = {}
        for fn in sorted(os.listdir(cls_dir)):
            if fn.lower().endswith(IMAGE_EXTS) and os.path.isfile(os.path.join(cls_dir, fn)):
                images[_image_id(fn)] = os.path.join(cls_dir, fn)
        gt = {}
        gt_dir = os.path.join(cls_dir, "GT")
        if os.path.isdir(gt_dir):
            candidates = {_image_id(fn): os.path.join(gt_dir, fn) for fn in sorted(os.listdir(gt_dir))}
            for image_id in images:
                if image_id not in candidates:
                    continue
                try:
                    load_mask(candidates[image_id])
                except (FormatError, OSError) as e:
                    log.warning("%s: unreadable ground truth (%s); treating as unlabeled", image_id, e)
                    continue
                gt[image_id] = candidates[image_id]
        groups.append(DatasetGroup(name=cls, images=images, gt=gt))
    return Dataset(root=root, groups=groups)


@dataclass
class ScoreReport:
    per_image: dict[tuple[str, str], tuple[float, float]] = field(default_factory=dict)
    per_class: dict[str, tuple[float, float]] = field(default_factory=dict)
    overall: tuple[float, float] = (0.0, 0.0)
    micro: tuple[float, float] = (0.0, 0.0)
    missing: list[tuple[str, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.missing


def score(preds_dir, dataset: Dataset) -> ScoreReport:
    """Score every labeled image; macro-average per class, classes averaged for
    the overall numbers. Missing predictions are flagged and excluded."""
    report = ScoreReport()
    for group in dataset.groups:
        pairs = []
        for image_id in sorted(group.gt):
            pred_path = os.path.join(os.fspath(preds_dir), image_id + ".png")
            if not os.path.isfile(pred_path):
                report.missing.append((group.name, image_id))
                continue
            pred = load_mask(pred_path)
            gt = load_mask(group.gt[image_id])
            j = jaccard(pred, gt)
            p = precision(pred, gt)
            report.per_image[(group.name, image_id)] = (j, p)
            pairs.append((j, p))
        if pairs:
            report.per_class[group.name] = (
                float(np.mean([j for j, _ in pairs])),
                float(np.mean([p for _, p in pairs])),
            )
    if report.per_class:
        report.overall = (
            float(np.mean([j for j, _ in report.per_class.values()])),
            float(np.mean([p for _, p in report.per_class.values()])),
        )
    if report.per_image:
        report.micro = (
            float(np.mean([j for j, _ in report.per_image.values()])),
            float(np.mean([p for _, p in report.per_image.values()])),
        )
    return report


def report_lines(report: ScoreReport) -> list[str]:
    """Machine-readable lines: one per image, then the macro summary (canonical)
    and the micro average as an auxiliary line."""
    lines = [
        f"{cls} {image_id} {j:.6f} {p:.6f}"
        for (cls, image_id), (j, p) in sorted(report.per_image.items())
    ]
    lines.append(f"OVERALL {report.overall[0]:.6f} {report.overall[1]:.6f}")
    lines.append(f"MICRO {report.micro[0]:.6f} {report.micro[1]:.6f}")
    return lines


def report_table(report: ScoreReport) -> str:
    """Human-oriented summary table."""
    rows = [f"{'class':<16} {'images':>6} {'J':>8} {'P':>8}"]
    for cls in sorted(report.per_class):
        n = sum(1 for (c, _) in report.per_image if c == cls)
        j, p = report.per_class[cls]
        rows.append(f"{cls:<16} {n:>6} {j:>8.4f} {p:>8.4f}")
    rows.append(f"{'OVERALL':<16} {len(report.per_image):>6} "
                f"{report.overall[0]:>8.4f} {report.overall[1]:>8.4f}")
    if report.missing:
        rows.append("missing predictions:")
        rows.extend(f"  {cls}/{image_id}" for cls, image_id in report.missing)
    return "\n".join(rows)
