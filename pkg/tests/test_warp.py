import numpy as np
import pytest

from testutil import gray_plane
from coseg.errors import ConfigurationError
from coseg.raster import FlowField, PairManifest, save_flow
from coseg.warp import WarpedMap, warp_into_key, warp_map


def const_flow(w, h, du, dv, sw=None, sh=None):
    return FlowField(
        np.full((h, w), du, np.float32),
        np.full((h, w), dv, np.float32),
        sw if sw is not None else w,
        sh if sh is not None else h,
    )


class TestWarpMap:
    def test_identity_flow_is_exact(self, rng):
        src = gray_plane(rng.uniform(size=(7, 9)))
        out = warp_map(src, FlowField.identity(9, 7))
        assert np.array_equal(out.values.plane(), src.plane())
        assert np.all(out.valid)

    def test_plus_one_shift_hand_trace(self):
        # backward sampling: target x reads source x+1, rightmost goes out of bounds
        src = gray_plane([[0.1, 0.5, 0.9]])
        out = warp_map(src, const_flow(3, 1, 1.0, 0.0))
        assert out.values.plane()[0, :2] == pytest.approx([0.5, 0.9])
        assert list(out.valid[0]) == [True, True, False]
        assert out.values.plane()[0, 2] == 0.0

    def test_sentinel_everywhere_all_invalid(self):
        src = gray_plane(np.full((2, 2), 0.6))
        out = warp_map(src, const_flow(2, 2, 1e10, 0.0))
        assert not np.any(out.valid)
        assert np.all(out.values.plane() == 0.0)

    def test_half_pixel_shift_interpolates(self):
        src = gray_plane([[0.0, 1.0]])
        out = warp_map(src, const_flow(2, 1, 0.5, 0.0))
        # x=0 samples 0.5 -> midpoint; x=1 samples 1.5, inside [-0.5, 1.5], clamps
        assert out.values.plane()[0, 0] == pytest.approx(0.5)
        assert out.values.plane()[0, 1] == pytest.approx(1.0)
        assert np.all(out.valid)

    def test_dimension_mismatch_rejected(self):
        src = gray_plane(np.zeros((3, 3)))
        with pytest.raises(ValueError):
            warp_map(src, const_flow(3, 3, 0.0, 0.0, sw=4, sh=3))

    def test_multichannel_rejected(self, rng):
        from coseg.raster import RasterPlane

        with pytest.raises(ValueError):
            warp_map(RasterPlane(rng.uniform(size=(3, 3, 3))), FlowField.identity(3, 3))

    def test_output_bounded_by_source_range(self, rng):
        src_vals = rng.uniform(0.2, 0.8, (11, 13))
        src = gray_plane(src_vals)
        du = rng.uniform(-4, 4, (11, 13)).astype(np.float32)
        dv = rng.uniform(-4, 4, (11, 13)).astype(np.float32)
        out = warp_map(src, FlowField(du, dv, 13, 11))
        vals = out.values.plane()[out.valid]
        assert vals.min() >= src_vals.min() - 1e-12
        assert vals.max() <= src_vals.max() + 1e-12

    def test_validity_monotone_under_shrinking_source(self, rng):
        du = rng.uniform(-3, 3, (8, 8)).astype(np.float32)
        dv = rng.uniform(-3, 3, (8, 8)).astype(np.float32)
        big = warp_map(gray_plane(rng.uniform(size=(8, 8))), FlowField(du, dv, 8, 8))
        small = warp_map(gray_plane(rng.uniform(size=(6, 6))), FlowField(du, dv, 6, 6))
        assert np.all(small.valid <= big.valid)

    def test_round_trip_analytic_inverse(self):
        h = w = 32
        yy, xx = np.mgrid[0:h, 0:w].astype(float)
        smooth = 0.5 + 0.4 * np.sin(2 * np.pi * xx / w) * np.cos(2 * np.pi * yy / h)
        src = gray_plane(smooth)
        fwd = const_flow(w, h, 1.5, -1.0)
        inv = const_flow(w, h, -1.5, 1.0)
        back = warp_map(warp_map(src, fwd).values, inv)
        interior = np.zeros((h, w), bool)
        interior[2:-2, 2:-2] = True
        interior &= back.valid
        err = np.abs(back.values.plane() - smooth)[interior]
        assert err.max() <= 0.02


class TestWarpedMap:
    def test_valid_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            WarpedMap(gray_plane(np.zeros((2, 3))), np.ones((3, 2), bool))


class TestWarpIntoKey:
    def _identity_manifest(self, tmp_path, pairs, w, h):
        lines = []
        for i, (src, tgt) in enumerate(pairs):
            flo = tmp_path / f"f{i}.flo"
            save_flow(FlowField.identity(w, h), flo)
            lines.append(f"{src} {tgt} {flo.name} {w} {h}")
        mp = tmp_path / "pairs.txt"
        mp.write_text("\n".join(lines) + "\n")
        return PairManifest.read(mp)

    def test_single_image_identity_only(self, rng):
        maps = [gray_plane(rng.uniform(size=(5, 5))) for _ in range(4)]
        out = warp_into_key({"key.png": maps}, "key.png", None)
        assert len(out) == 4
        for got, want in zip(out, maps):
            assert np.array_equal(got.values.plane(), want.plane())
            assert np.all(got.valid)

    def test_three_images_four_sources_gives_twelve(self, tmp_path, rng):
        ids = ["a.png", "b.png", "k.png"]
        maps = {i: [gray_plane(rng.uniform(size=(4, 6))) for _ in range(4)] for i in ids}
        m = self._identity_manifest(
            tmp_path, [("a.png", "k.png"), ("b.png", "k.png")], 6, 4
        )
        out = warp_into_key(maps, "k.png", m)
        assert len(out) == 12

    def test_ordering_by_image_then_source(self, tmp_path):
        maps = {
            "b.png": [gray_plane(np.full((2, 2), 0.3)), gray_plane(np.full((2, 2), 0.4))],
            "a.png": [gray_plane(np.full((2, 2), 0.1)), gray_plane(np.full((2, 2), 0.2))],
        }
        m = self._identity_manifest(tmp_path, [("b.png", "a.png")], 2, 2)
        out = warp_into_key(maps, "a.png", m)
        assert [c.values.plane()[0, 0] for c in out] == pytest.approx([0.1, 0.2, 0.3, 0.4])

    def test_missing_pair_names_it(self, tmp_path, rng):
        maps = {
            "m.png": [gray_plane(rng.uniform(size=(3, 3)))],
            "k.png": [gray_plane(rng.uniform(size=(3, 3)))],
        }
        m = self._identity_manifest(tmp_path, [], 3, 3)
        with pytest.raises(ConfigurationError, match="m.png -> k.png"):
            warp_into_key(maps, "k.png", m)

    def test_unknown_key_rejected(self, rng):
        with pytest.raises(ValueError):
            warp_into_key({"a.png": [gray_plane(np.zeros((2, 2)))]}, "z.png", None)
