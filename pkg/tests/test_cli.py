import json

import numpy as np
import pytest

from locaug.cli import main, read_config_file
from locaug.tensor import read_tensor


def run_cli(*args):
    return main(list(args))


@pytest.fixture(scope="module")
def circle_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("circle")
    rc = run_cli("gen-data", "--task", "circle", "--out", str(root),
                 "--height", "16", "--width", "16", "--radius", "4",
                 "--train", "10", "--test", "4", "--seed", "5")
    assert rc == 0
    return root


class TestGenData:
    def test_layout(self, circle_dir):
        assert (circle_dir / "images").is_dir()
        assert (circle_dir / "masks").is_dir()
        ids = (circle_dir / "train.txt").read_text().split()
        assert len(ids) == 10
        assert (circle_dir / "images" / f"{ids[0]}.ppm").exists()

    def test_bias_task(self, tmp_path):
        rc = run_cli("gen-data", "--task", "bias", "--out", str(tmp_path / "b"),
                     "--height", "24", "--width", "24", "--square-size", "5",
                     "--squares", "2", "--train", "4", "--test", "2")
        assert rc == 0
        assert (tmp_path / "b" / "test.txt").exists()


class TestTrainEval(object):
    def test_train_eval_cycle(self, circle_dir, tmp_path, capsys):
        out = tmp_path / "run"
        rc = run_cli("train", "--data", str(circle_dir), "--out", str(out),
                     "--variant", "rgb+coord", "--depth", "1", "--widths", "4",
                     "--lr", "2e-3", "--batch", "4", "--epochs", "2", "--seed", "3")
        assert rc == 0
        stdout = capsys.readouterr().out
        assert "model_sha256=" in stdout
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["depth"] == 1
        assert manifest["config"]["batch"] == 4

        rc = run_cli("eval", "--model", str(out / "model.lnet"),
                     "--data", str(circle_dir), "--threshold", "0.5")
        assert rc == 0
        stdout = capsys.readouterr().out
        assert "f_beta=" in stdout and "mean_iou=" in stdout

    def test_rerun_from_manifest_reproduces_hash(self, circle_dir, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        run_cli("train", "--data", str(circle_dir), "--out", str(a),
                "--variant", "rgb+dist", "--depth", "1", "--widths", "4",
                "--epochs", "2", "--seed", "1")
        capsys.readouterr()
        rc = run_cli("train", "--config", str(a / "manifest.json"), "--out", str(b))
        assert rc == 0
        ma = json.loads((a / "manifest.json").read_text())
        mb = json.loads((b / "manifest.json").read_text())
        assert ma["model_sha256"] == mb["model_sha256"]

    def test_flags_override_config(self, circle_dir, tmp_path):
        cfgfile = tmp_path / "run.cfg"
        cfgfile.write_text("depth=1\nwidths=4\nepochs=2\nvariant=rgb\nseed=2\n# comment\n")
        out = tmp_path / "o"
        rc = run_cli("train", "--data", str(circle_dir), "--out", str(out),
                     "--config", str(cfgfile), "--variant", "rgb+coord")
        assert rc == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["variant"] == "rgb+coord"  # flag wins
        assert manifest["config"]["epochs"] == 2  # file value survives

    def test_nan_abort_is_an_error(self, circle_dir, tmp_path, capsys):
        rc = run_cli("train", "--data", str(circle_dir), "--out", str(tmp_path / "nan"),
                     "--depth", "1", "--widths", "4", "--epochs", "3",
                     "--optimizer", "sgd", "--lr", "1e100")
        assert rc == 2
        err = capsys.readouterr().err
        assert err.startswith("error:") and "non-finite" in err

    def test_missing_data_is_an_error(self, tmp_path, capsys):
        rc = run_cli("train", "--out", str(tmp_path / "x"), "--epochs", "1")
        assert rc == 2
        assert capsys.readouterr().err.startswith("error:")


class TestBench(object):
    def test_single_variant_single_seed(self, circle_dir, capsys):
        rc = run_cli("bench", "--data", str(circle_dir), "--depth", "1",
                     "--widths", "4", "--epochs", "1", "--variants", "rgb,rgb+coord",
                     "--seeds", "0")
        assert rc == 0
        out = capsys.readouterr().out
        assert "rgb+coord" in out
        assert "extra_params=72" in out  # 2 * 9 * 4


class TestGradcheckCommand:
    def test_passes(self, capsys):
        rc = run_cli("gradcheck", "--instances", "1")
        assert rc == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "checks passed" in out


class TestAugmentCommand:
    def test_writes_laug(self, tmp_path, capsys):
        out = tmp_path / "loc.laug"
        rc = run_cli("augment", "--height", "8", "--width", "6",
                     "--variant", "rgb+dist+coord", "--norm", "unit", "--out", str(out))
        assert rc == 0
        t = read_tensor(out.read_bytes())
        assert t.shape == (1, 3, 8, 6)
        assert t.min() >= 0.0 and t.max() <= 1.0

    def test_rgb_has_nothing_to_export(self, tmp_path, capsys):
        rc = run_cli("augment", "--height", "8", "--width", "8",
                     "--variant", "rgb", "--out", str(tmp_path / "x.laug"))
        assert rc == 2
        assert "error:" in capsys.readouterr().err

    def test_symmetric_range(self, tmp_path):
        out = tmp_path / "sym.laug"
        run_cli("augment", "--height", "5", "--width", "5",
                "--variant", "rgb+coord", "--norm", "symmetric", "--out", str(out))
        t = read_tensor(out.read_bytes())
        assert t.min() == -1.0 and t.max() == 1.0


class TestConfigFile:
    def test_key_value_parsing(self, tmp_path):
        f = tmp_path / "c.cfg"
        f.write_text("lr=0.01\nwidths=8,16\n# note\nthreshold=adaptive\n")
        cfg = read_config_file(f)
        assert cfg == {"lr": "0.01", "widths": "8,16", "threshold": "adaptive"}

    def test_manifest_json_accepted(self, tmp_path):
        f = tmp_path / "m.json"
        f.write_text(json.dumps({"config": {"lr": 0.5, "depth": 2}}))
        assert read_config_file(f) == {"lr": 0.5, "depth": 2}

    def test_malformed_line(self, tmp_path):
        f = tmp_path / "bad.cfg"
        f.write_text("this is not a pair\n")
        with pytest.raises(ValueError, match="key=value"):
            read_config_file(f)
