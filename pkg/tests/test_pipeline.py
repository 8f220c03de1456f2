import os

import numpy as np
import pytest

from coseg import cli
from coseg.errors import ConfigurationError
from coseg.evaluate import load_dataset, score
from coseg.fusion import FusedMap
from coseg.graphcut import GrabCut, otsu_threshold, seeds_from_otsu
from coseg.pipeline import (
    PipelineConfig,
    cluster_stage,
    fuse_stage,
    load_config,
    read_grouping,
    run_pipeline,
    segment_stage,
    validate_inputs,
)
from coseg.raster import load_image, load_saliency
from coseg.synthetic import gen_synthetic


def synth_config(tmp_path, **kwargs):
    g = gen_synthetic(tmp_path, **kwargs)
    cfg = load_config(g.config_path)
    return g, cfg


def read_bytes_map(directory):
    out = {}
    for dirpath, _, files in os.walk(directory):
        for fn in files:
            p = os.path.join(dirpath, fn)
            out[os.path.relpath(p, directory)] = open(p, "rb").read()
    return out


class TestLoadConfig:
    def test_file_and_overrides(self, tmp_path):
        p = tmp_path / "c.txt"
        p.write_text("input_dir=/a\nseed=3\ngc_gamma=25.5\nsaliency_dirs=/x,/y\n")
        cfg = load_config(p, {"seed": 9})
        assert cfg.input_dir == "/a"
        assert cfg.seed == 9  # flag wins
        assert cfg.gc_gamma == 25.5
        assert cfg.saliency_dirs == ["/x", "/y"]

    def test_unknown_key_rejected(self, tmp_path):
        p = tmp_path / "c.txt"
        p.write_text("not_a_key=1\n")
        with pytest.raises(ConfigurationError):
            load_config(p)

    def test_malformed_line_rejected(self, tmp_path):
        p = tmp_path / "c.txt"
        p.write_text("just words\n")
        with pytest.raises(ConfigurationError):
            load_config(p)

    def test_defaults(self):
        cfg = load_config()
        assert cfg.gc_iters == 5 and cfg.gc_gamma == 50.0 and cfg.gc_components == 5


class TestValidation:
    def test_missing_saliency_named_and_no_partial_output(self, tmp_path):
        g, cfg = synth_config(tmp_path, group_size=2, image_size=32)
        victim = os.path.join(g.saliency_dirs[1], "img_001.png")
        os.remove(victim)
        with pytest.raises(ConfigurationError, match="img_001"):
            run_pipeline(cfg)
        assert not os.path.exists(cfg.output_dir)  # fail-fast: nothing written

    def test_missing_input_dir(self):
        cfg = PipelineConfig(input_dir="/nonexistent", saliency_dirs=["/x"], output_dir="/o")
        with pytest.raises(ConfigurationError):
            validate_inputs(cfg)

    def test_segment_before_fuse_errors(self, tmp_path):
        g, cfg = synth_config(tmp_path, group_size=2, image_size=32)
        with pytest.raises(ConfigurationError, match="fuse"):
            segment_stage(cfg)

    def test_fuse_before_cluster_errors(self, tmp_path):
        g, cfg = synth_config(tmp_path, group_size=2, image_size=32)
        os.makedirs(cfg.output_dir, exist_ok=True)
        with pytest.raises(ConfigurationError, match="cluster"):
            fuse_stage(cfg)

    def test_fuse_missing_required_flow(self, tmp_path):
        g, cfg = synth_config(tmp_path, group_size=3, image_size=32)
        cluster_stage(cfg)
        grouping = read_grouping(os.path.join(cfg.output_dir, "grouping.txt"))
        open(g.manifest_path, "w").close()  # drop every flow
        if grouping.k < len(g.image_ids) or True:
            pass
        with pytest.raises(ConfigurationError, match="lacks required flows"):
            fuse_stage(cfg)


class TestStagedEqualsRun:
    def test_byte_for_byte(self, tmp_path):
        g1, cfg1 = synth_config(tmp_path / "a", group_size=3, image_size=48, corruption=1, seed=5)
        g2, cfg2 = synth_config(tmp_path / "b", group_size=3, image_size=48, corruption=1, seed=5)
        run_pipeline(cfg1)
        cluster_stage(cfg2)
        fuse_stage(cfg2)
        segment_stage(cfg2)
        a = read_bytes_map(cfg1.output_dir)
        b = read_bytes_map(cfg2.output_dir)
        assert a.keys() == b.keys()
        for k in a:
            assert a[k] == b[k], f"stage output differs: {k}"

    def test_determinism(self, tmp_path):
        g1, cfg1 = synth_config(tmp_path / "a", group_size=3, image_size=48, seed=2)
        g2, cfg2 = synth_config(tmp_path / "b", group_size=3, image_size=48, seed=2)
        run_pipeline(cfg1)
        run_pipeline(cfg2)
        a = read_bytes_map(cfg1.output_dir)
        b = read_bytes_map(cfg2.output_dir)
        assert a == b


class TestDegenerateConfigs:
    def test_single_image_single_source(self, tmp_path):
        g, cfg = synth_config(tmp_path, group_size=1, image_size=48, sources=1)
        run_pipeline(cfg)
        # the pipeline reduces to Otsu + GrabCut on that one (fused == own) map
        image = load_image(os.path.join(g.image_dir, "img_000.png"))
        fused = FusedMap(
            load_saliency(
                os.path.join(cfg.output_dir, "fused", "img_000.png"),
                image.width, image.height,
            )
        )
        trimap = seeds_from_otsu(fused, otsu_threshold(fused))
        want = GrabCut(seed=cfg.seed).segment(image, trimap)
        from coseg.raster import load_mask

        got = load_mask(os.path.join(cfg.output_dir, "img_000.png"))
        assert np.array_equal(got.bits, want.bits)

    def test_masks_recover_synthetic_gt(self, tmp_path):
        g, cfg = synth_config(tmp_path, group_size=3, image_size=48, corruption=0, seed=1)
        run_pipeline(cfg)
        ds = load_dataset(os.path.join(tmp_path, "dataset"))
        r = score(cfg.output_dir, ds)
        assert r.ok
        assert r.overall[0] >= 0.90


class TestCli:
    def test_gen_run_evaluate_roundtrip(self, tmp_path, capsys):
        out = str(tmp_path / "fix")
        assert cli.main(["gen-synthetic", "--out", out, "--group-size", "3",
                         "--image-size", "48", "--corrupt", "1"]) == 0
        assert cli.main(["run", "--config", os.path.join(out, "config.txt")]) == 0
        rc = cli.main([
            "evaluate",
            "--dataset", os.path.join(out, "dataset"),
            "--preds", os.path.join(out, "predictions"),
            "--out", str(tmp_path / "scores.txt"),
        ])
        assert rc == 0
        lines = (tmp_path / "scores.txt").read_text().strip().splitlines()
        overall = [ln for ln in lines if ln.startswith("OVERALL")][0]
        assert float(overall.split()[1]) >= 0.90
        assert any(ln.startswith("MICRO") for ln in lines)

    def test_unknown_flag_exit_2(self):
        with pytest.raises(SystemExit) as e:
            cli.main(["run", "--no-such-flag"])
        assert e.value.code == 2

    def test_missing_subcommand_exit_2(self):
        with pytest.raises(SystemExit) as e:
            cli.main([])
        assert e.value.code == 2

    def test_runtime_failure_exit_1(self, tmp_path, capsys):
        rc = cli.main(["run", "--input-dir", str(tmp_path / "nope"),
                       "--saliency-dirs", str(tmp_path), "--output-dir", str(tmp_path / "o")])
        assert rc == 1
        assert "error" in capsys.readouterr().err

    def test_evaluate_missing_pred_exit_1(self, tmp_path, capsys):
        out = str(tmp_path / "fix")
        cli.main(["gen-synthetic", "--out", out, "--group-size", "2", "--image-size", "32"])
        empty = tmp_path / "empty_preds"
        empty.mkdir()
        rc = cli.main(["evaluate", "--dataset", os.path.join(out, "dataset"),
                       "--preds", str(empty)])
        assert rc == 1

    def test_flag_overrides_config(self, tmp_path):
        out = str(tmp_path / "fix")
        cli.main(["gen-synthetic", "--out", out, "--group-size", "2", "--image-size", "32"])
        alt = str(tmp_path / "alt_out")
        assert cli.main(["cluster", "--config", os.path.join(out, "config.txt"),
                         "--output-dir", alt]) == 0
        assert os.path.isfile(os.path.join(alt, "grouping.txt"))
        assert os.path.isfile(os.path.join(alt, "required_pairs.txt"))
