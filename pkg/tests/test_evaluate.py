import logging
import os

import numpy as np
import pytest

from coseg.evaluate import (
    jaccard,
    load_dataset,
    precision,
    report_lines,
    report_table,
    score,
)
from coseg.raster import BinaryMask, save_mask
from testutil import write_rgb_png


def mask(bits):
    return BinaryMask(np.asarray(bits, bool))


class TestJaccard:
    def test_identity(self):
        m = mask(np.eye(4))
        assert jaccard(m, m) == 1.0

    def test_partial_overlap(self):
        pred = mask([[1, 1, 1, 1, 0, 0]])
        gt = mask([[0, 0, 1, 1, 1, 1]])
        assert jaccard(pred, gt) == pytest.approx(2 / 6)

    def test_empty_pred_nonempty_gt(self):
        assert jaccard(mask(np.zeros((3, 3))), mask(np.eye(3))) == 0.0

    def test_both_empty(self):
        assert jaccard(mask(np.zeros((3, 3))), mask(np.zeros((3, 3)))) == 1.0

    def test_symmetric(self, rng):
        a = mask(rng.uniform(size=(8, 8)) > 0.5)
        b = mask(rng.uniform(size=(8, 8)) > 0.5)
        assert jaccard(a, b) == jaccard(b, a)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            jaccard(mask(np.zeros((2, 2))), mask(np.zeros((3, 3))))

    def test_bounded(self, rng):
        for _ in range(20):
            a = mask(rng.uniform(size=(5, 5)) > 0.5)
            b = mask(rng.uniform(size=(5, 5)) > 0.5)
            assert 0.0 <= jaccard(a, b) <= 1.0


class TestPrecision:
    def test_identity(self):
        m = mask(np.eye(5))
        assert precision(m, m) == 1.0

    def test_ninety_percent(self):
        pred = np.zeros((10, 10), bool)
        gt = pred.copy()
        gt[0, :] = True  # 10 of 100 disagree
        assert precision(mask(pred), mask(gt)) == pytest.approx(0.90)

    def test_complement_scores_zero(self):
        gt = mask(np.eye(4))
        pred = mask(~np.eye(4, dtype=bool))
        assert precision(pred, gt) == 0.0

    def test_symmetric(self, rng):
        a = mask(rng.uniform(size=(6, 6)) > 0.5)
        b = mask(rng.uniform(size=(6, 6)) > 0.5)
        assert precision(a, b) == precision(b, a)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            precision(mask(np.zeros((2, 2))), mask(np.zeros((2, 3))))


def make_class(root, name, masks, with_gt=True):
    """Write a class directory with images and optionally GT masks."""
    cls = root / name
    gt_dir = cls / "GT"
    os.makedirs(gt_dir if with_gt else cls, exist_ok=True)
    for image_id, bits in masks.items():
        h, w = np.asarray(bits).shape
        write_rgb_png(cls / f"{image_id}.png", np.random.default_rng(0).uniform(size=(h, w, 3)))
        if with_gt:
            save_mask(mask(bits), gt_dir / f"{image_id}.png")
    return cls


class TestLoadDataset:
    def test_class_layout(self, tmp_path):
        make_class(tmp_path, "cat", {"c1": np.eye(4), "c2": np.eye(4)})
        make_class(tmp_path, "dog", {"d1": np.eye(4)})
        ds = load_dataset(tmp_path)
        assert [g.name for g in ds.groups] == ["cat", "dog"]
        assert sorted(ds.groups[0].images) == ["c1", "c2"]
        assert sorted(ds.groups[0].gt) == ["c1", "c2"]

    def test_missing_gt_dir_gives_unlabeled(self, tmp_path):
        make_class(tmp_path, "noise", {"n1": np.eye(4)}, with_gt=False)
        ds = load_dataset(tmp_path)
        assert ds.groups[0].images and not ds.groups[0].gt

    def test_corrupt_gt_warns_and_skips(self, tmp_path, caplog):
        make_class(tmp_path, "cat", {"c1": np.eye(4)})
        (tmp_path / "cat" / "GT" / "c1.png").write_bytes(b"not a png")
        with caplog.at_level(logging.WARNING, logger="coseg.evaluate"):
            ds = load_dataset(tmp_path)
        assert "c1" not in ds.groups[0].gt
        assert any("unreadable" in r.message for r in caplog.records)

    def test_empty_root_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            load_dataset(tmp_path)

    def test_gray_mask_binarizes_nonzero(self, tmp_path):
        from PIL import Image

        from coseg.raster import load_mask

        p = tmp_path / "m.png"
        Image.fromarray(np.array([[0, 128], [255, 0]], np.uint8), "L").save(p)
        assert np.array_equal(load_mask(p).bits, [[False, True], [True, False]])


class TestScore:
    def _write_preds(self, preds_dir, masks):
        os.makedirs(preds_dir, exist_ok=True)
        for image_id, bits in masks.items():
            save_mask(mask(bits), preds_dir / f"{image_id}.png")

    def test_perfect_predictions(self, tmp_path):
        gt = np.eye(6, dtype=bool)
        make_class(tmp_path / "ds", "cat", {"c1": gt, "c2": ~gt})
        preds = tmp_path / "preds"
        self._write_preds(preds, {"c1": gt, "c2": ~gt})
        r = score(preds, load_dataset(tmp_path / "ds"))
        assert r.overall == (1.0, 1.0)
        assert r.ok

    def test_macro_average_of_two_classes(self, tmp_path):
        # class a: J = 2/6; class b: J = 1.0 -> overall mean of class means
        gt = np.zeros((1, 6), bool)
        gt[0, 2:] = True
        pred_a = np.zeros((1, 6), bool)
        pred_a[0, :4] = True
        make_class(tmp_path / "ds", "a", {"x": gt})
        make_class(tmp_path / "ds", "b", {"y": gt})
        preds = tmp_path / "preds"
        self._write_preds(preds, {"x": pred_a, "y": gt})
        r = score(preds, load_dataset(tmp_path / "ds"))
        assert r.overall[0] == pytest.approx((2 / 6 + 1.0) / 2, abs=1e-12)

    def test_macro_matches_flat_recomputation(self, tmp_path, rng):
        ds_root = tmp_path / "ds"
        all_masks = {}
        for cls in ("a", "b", "c"):
            gts = {f"{cls}{i}": rng.uniform(size=(5, 5)) > 0.5 for i in range(3)}
            make_class(ds_root, cls, gts)
            for k in gts:
                all_masks[k] = rng.uniform(size=(5, 5)) > 0.5
        preds = tmp_path / "preds"
        self._write_preds(preds, all_masks)
        r = score(preds, load_dataset(ds_root))
        by_class = {}
        for (cls, _), (j, p) in r.per_image.items():
            by_class.setdefault(cls, []).append((j, p))
        want_j = np.mean([np.mean([j for j, _ in v]) for v in by_class.values()])
        want_p = np.mean([np.mean([p for _, p in v]) for v in by_class.values()])
        assert r.overall[0] == pytest.approx(want_j, abs=1e-12)
        assert r.overall[1] == pytest.approx(want_p, abs=1e-12)
        micro_j = np.mean([j for j, _ in r.per_image.values()])
        assert r.micro[0] == pytest.approx(micro_j, abs=1e-12)

    def test_missing_prediction_flagged(self, tmp_path):
        gt = np.eye(4, dtype=bool)
        make_class(tmp_path / "ds", "cat", {"c1": gt, "c2": gt})
        preds = tmp_path / "preds"
        self._write_preds(preds, {"c1": gt})
        r = score(preds, load_dataset(tmp_path / "ds"))
        assert r.missing == [("cat", "c2")]
        assert not r.ok
        assert ("cat", "c1") in r.per_image and ("cat", "c2") not in r.per_image

    def test_unlabeled_images_excluded(self, tmp_path):
        gt = np.eye(4, dtype=bool)
        cls = make_class(tmp_path / "ds", "cat", {"c1": gt})
        write_rgb_png(cls / "noise.png", np.zeros((4, 4, 3)))
        preds = tmp_path / "preds"
        self._write_preds(preds, {"c1": gt})
        r = score(preds, load_dataset(tmp_path / "ds"))
        assert list(r.per_image) == [("cat", "c1")]
        assert r.ok


class TestReportFormat:
    def test_lines_and_table(self, tmp_path):
        gt = np.eye(4, dtype=bool)
        make_class(tmp_path / "ds", "cat", {"c1": gt})
        preds = tmp_path / "preds"
        os.makedirs(preds)
        save_mask(mask(gt), preds / "c1.png")
        r = score(preds, load_dataset(tmp_path / "ds"))
        lines = report_lines(r)
        assert lines[0] == "cat c1 1.000000 1.000000"
        assert lines[-2] == "OVERALL 1.000000 1.000000"
        assert lines[-1] == "MICRO 1.000000 1.000000"
        table = report_table(r)
        assert "OVERALL" in table and "cat" in table
