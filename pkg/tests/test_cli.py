import csv
import json

import numpy as np
import pytest

from reciprocal_rbm.cli import main, parse_modes
from reciprocal_rbm.data import ImageSet, save_idx
from reciprocal_rbm.errors import ConfigError
from reciprocal_rbm.rbm import RbmParams, load_checkpoint, save_checkpoint

from helpers import random_params

TRAIN = ["train", "--synthetic-side", "3", "--synthetic-items", "60", "--n-hidden", "4", "--epochs", "3",
         "--batch-size", "20", "--k-steps", "2", "--strategy", "cd"]


@pytest.fixture
def ckpt(tmp_path):
    return str(save_checkpoint(tmp_path / "m.rbm", random_params(9, 4, 0, scale=0.3), {"epoch": 0}))


def _read(path):
    return path.read_text()


class TestExitCodes:
    def test_unknown_flag(self, capsys):
        assert main(["analyze-spectrum", "--bogus"]) == 1
        assert "usage" in capsys.readouterr().err

    def test_unknown_command(self):
        assert main(["frobnicate"]) == 1

    def test_missing_checkpoint_names_flag(self, tmp_path, capsys):
        assert main(["boson-report", "--out", str(tmp_path)]) == 1
        assert "--checkpoint" in capsys.readouterr().err
        assert main(["boson-report", "--checkpoint", str(tmp_path / "nope.rbm")]) == 1
        assert "--checkpoint" in capsys.readouterr().err

    def test_data_error(self, tmp_path):
        (tmp_path / "bad.rbm").write_bytes(b"junk")
        assert main(["analyze-spectrum", "--checkpoint", str(tmp_path / "bad.rbm"), "--out", str(tmp_path)]) == 2

    def test_bad_idx(self, tmp_path):
        (tmp_path / "x.idx").write_bytes(b"\x00\x00\x09\x99" + b"\0" * 12)
        assert main(["train", "--data", str(tmp_path / "x.idx"), "--out", str(tmp_path)]) == 2

    def test_numerical_error(self, tmp_path):
        save_checkpoint(tmp_path / "big.rbm", RbmParams.zeros(30, 30))
        assert main(["estimate-logz", "--checkpoint", str(tmp_path / "big.rbm"), "--mode", "exact",
                     "--out", str(tmp_path)]) == 3


class TestConfigFile:
    def test_flag_overrides_file(self, tmp_path):
        (tmp_path / "c.ini").write_text("learning_rate = 0.05\nepochs = 2\n")
        out = tmp_path / "o"
        assert main(TRAIN + ["--config", str(tmp_path / "c.ini"), "--learning-rate", "0.01", "--out", str(out)]) == 0
        cfg = json.loads((out / "manifest.json").read_text())["config"]
        assert cfg["learning_rate"] == 0.01 and cfg["epochs"] == 3

    def test_file_value_used(self, tmp_path):
        (tmp_path / "c.ini").write_text("[train]\nlearning-rate = 0.05\n[general]\nseed = 4\n")
        out = tmp_path / "o"
        assert main(TRAIN + ["--config", str(tmp_path / "c.ini"), "--out", str(out)]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["learning_rate"] == 0.05 and manifest["seed"] == 4

    def test_empty_file_gives_defaults(self, tmp_path):
        (tmp_path / "c.ini").write_text("")
        out = tmp_path / "o"
        assert main(TRAIN + ["--config", str(tmp_path / "c.ini"), "--out", str(out)]) == 0
        assert json.loads((out / "manifest.json").read_text())["config"]["momentum"] == 0.0

    def test_malformed_field_named(self, tmp_path, capsys):
        (tmp_path / "c.ini").write_text("\nepochs = many\n")
        assert main(TRAIN + ["--config", str(tmp_path / "c.ini")]) == 1
        err = capsys.readouterr().err
        assert "epochs" in err and ":2" in err

    def test_unknown_field(self, tmp_path, capsys):
        (tmp_path / "c.ini").write_text("[train]\nlearnin_rate = 1\n")
        assert main(TRAIN + ["--config", str(tmp_path / "c.ini")]) == 1
        assert "learnin_rate" in capsys.readouterr().err


class TestCommands:
    def test_train_writes_checkpoint_trace_manifest(self, tmp_path):
        out = tmp_path / "run"
        assert main(TRAIN + ["--trace", "--out", str(out)]) == 0
        params, meta = load_checkpoint(out / "model.rbm")
        assert params.n_visible == 9 and meta["epoch"] == 3 and meta["strategy"] == "cd"
        lines = [json.loads(x) for x in (out / "trace.jsonl").read_text().splitlines()]
        assert [r["epoch"] for r in lines] == [0, 1, 2, 3]
        assert lines[1]["checkpoint"] == "checkpoints/epoch_0001.rbm"
        manifest = json.loads((out / "manifest.json").read_text())
        assert "model.rbm" in manifest["outputs"] and manifest["artifact_version"]

    def test_train_from_idx(self, tmp_path):
        imgs = ImageSet(np.random.default_rng(0).integers(0, 256, (30, 3, 3), dtype=np.uint8))
        save_idx(imgs, tmp_path / "x.idx")
        assert main(["train", "--data", str(tmp_path / "x.idx"), "--n-hidden", "3", "--epochs", "1",
                     "--batch-size", "10", "--k-steps", "1", "--out", str(tmp_path / "o")]) == 0

    def test_zero_weight_spectrum(self, tmp_path):
        save_checkpoint(tmp_path / "z.rbm", RbmParams.zeros(5, 3))
        assert main(["analyze-spectrum", "--checkpoint", str(tmp_path / "z.rbm"), "--out", str(tmp_path)]) == 0
        rows = list(csv.DictReader((tmp_path / "spectrum_modes.csv").open()))
        assert all(float(r["lambda"]) == 0.0 for r in rows)
        assert json.loads((tmp_path / "spectrum.json").read_text())["spectrum"]["n_active"] == 0

    @pytest.mark.parametrize("args,outputs", [
        (["sample", "--n-samples", "4", "--k-steps", "3"], ["samples.csv"]),
        (["estimate-logz", "--mode", "exact"], ["logz.json"]),
        (["estimate-logz", "--mode", "ais", "--temps", "20", "--chains", "10"], ["logz.json"]),
        (["probe-symmetry", "--repeats", "2", "--baseline-splits", "5"], ["symmetry.json", "symmetry_scores.csv"]),
        (["rotate-experiment", "--synthetic-side", "3", "--n-samples", "5", "--n-images", "2"],
         ["rotate.json", "before_000.csv", "after_001.csv"]),
        (["kurtosis-scan", "--samples", "10000"], ["kurtosis.json", "kurtosis_modes.csv"]),
        (["boson-report", "--beta", "2"], ["boson.json"]),
    ])
    def test_analysis_commands(self, tmp_path, ckpt, args, outputs):
        out = tmp_path / "o"
        assert main(args + ["--checkpoint", ckpt, "--out", str(out)]) == 0
        for name in outputs + ["manifest.json"]:
            assert (out / name).is_file()

    def test_logz_payload(self, tmp_path, ckpt):
        main(["estimate-logz", "--checkpoint", ckpt, "--mode", "exact", "--out", str(tmp_path)])
        assert set(json.loads((tmp_path / "logz.json").read_text())) == {"log_z", "std_err", "mode"}

    def test_haar_kurtosis(self, tmp_path):
        assert main(["kurtosis-scan", "--haar-visible", "6", "--haar-hidden", "4", "--samples", "10000",
                     "--out", str(tmp_path)]) == 0
        assert json.loads((tmp_path / "kurtosis.json").read_text())["n_modes"] == 4

    def test_trace_landscape(self, tmp_path):
        run = tmp_path / "run"
        main(TRAIN + ["--trace", "--out", str(run)])
        out = tmp_path / "tl"
        assert main(["trace-landscape", "--checkpoints", str(run / "checkpoints" / "*.rbm"),
                     "--synthetic-side", "3", "--synthetic-items", "50", "--modes", "1,M+1",
                     "--gibbs-chains", "10", "--gibbs-steps", "2", "--out", str(out)]) == 0
        rows = list(csv.DictReader((out / "landscape.csv").open()))
        assert [(r["epoch"], r["mode"]) for r in rows[:2]] == [("0", "1"), ("0", "5")]
        assert len(rows) == 8

    def test_trace_landscape_no_match(self, tmp_path):
        assert main(["trace-landscape", "--checkpoints", str(tmp_path / "*.rbm"), "--synthetic-side", "3"]) == 1


class TestModes:
    def test_parse(self):
        assert parse_modes("1,M+1,N", 10, 4) == [0, 4, 9]

    @pytest.mark.parametrize("bad", ["0", "x", "M+20", ""])
    def test_bad(self, bad):
        with pytest.raises(ConfigError):
            parse_modes(bad, 10, 4)


class TestReplay:
    def test_byte_identical(self, tmp_path, ckpt):
        out = tmp_path / "a"
        assert main(["probe-symmetry", "--checkpoint", ckpt, "--repeats", "2", "--baseline-splits", "5",
                     "--seed", "3", "--out", str(out)]) == 0
        assert main(["replay", str(out / "manifest.json"), "--out", str(tmp_path / "b")]) == 0
        for name in ("symmetry.json", "symmetry_scores.csv"):
            assert (out / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_default_replay_dir(self, tmp_path, ckpt):
        main(["boson-report", "--checkpoint", ckpt, "--out", str(tmp_path)])
        assert main(["replay", str(tmp_path / "manifest.json")]) == 0
        assert (tmp_path / "replay" / "boson.json").read_bytes() == (tmp_path / "boson.json").read_bytes()

    def test_missing_manifest(self, tmp_path):
        assert main(["replay", str(tmp_path / "none.json")]) == 1
