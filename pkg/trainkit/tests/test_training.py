import csv
import dataclasses
import json
import math

import numpy as np
import pytest

torch = pytest.importorskip("torch")

from trainkit import cli, dataset as dsmod, training
from trainkit import scenario as sn
from trainkit.config import TrainConfig

from conftest import cw_doc

FAST = TrainConfig(epochs=12, batch=64, lr=1e-3, layers=(16, 16, 16),
                   k=4, sizes=(512, 128, 32))


@pytest.fixture(scope="module")
def ds():
    setup = sn.from_doc(cw_doc())
    return dsmod.make_dataset(setup, FAST, seed=11)


@pytest.fixture(scope="module")
def result(ds):
    return training.train(FAST, ds, seed=11)


class TestTraining:
    def test_beats_constant_baseline(self, result):
        assert result.val_mse < 0.5 * result.baseline_mse
        assert result.test_mse < result.baseline_mse

    def test_toy_preset_beats_constant_baseline(self):
        setup = sn.from_doc(cw_doc())
        cfg = dataclasses.replace(TrainConfig.toy(), sizes=(1024, 256, 64))
        d = dsmod.make_dataset(setup, cfg, seed=2)
        res = training.train(cfg, d, seed=2)
        assert res.val_mse < res.baseline_mse

    def test_curve_one_row_per_epoch(self, result):
        assert len(result.curve) == FAST.epochs
        epochs = [row[0] for row in result.curve]
        assert epochs == list(range(1, FAST.epochs + 1))
        assert result.curve[0][1] == pytest.approx(FAST.lr)
        assert all(math.isfinite(row[2]) and math.isfinite(row[3])
                   for row in result.curve)

    def test_seeded_reproducibility(self, ds, result):
        again = training.train(FAST, ds, seed=11)
        assert abs(again.val_mse - result.val_mse) <= 1e-6
        assert again.curve == result.curve

    def test_seed_changes_the_run(self, ds, result):
        other = training.train(FAST, ds, seed=12)
        assert other.val_mse != result.val_mse

    def test_divergence_aborts_with_epoch(self, ds):
        sick = dataclasses.replace(ds, train_y=ds.train_y + 1e200,
                                   val_y=ds.val_y + 1e200)
        with pytest.raises(training.DivergenceError, match="epoch 1"):
            training.train(FAST, sick, seed=11)

    def test_empty_split_rejected(self, ds):
        empty = dataclasses.replace(ds, train_x=ds.train_x[:0],
                                    train_y=ds.train_y[:0])
        with pytest.raises(ValueError):
            training.train(FAST, empty, seed=11)

    def test_plateau_drops_the_learning_rate(self, ds):
        # pure-noise labels cap the achievable loss at the noise floor,
        # so after the quick mean fit the 1% rule must start firing
        rng = np.random.default_rng(0)
        noisy = dataclasses.replace(
            ds, train_y=rng.normal(0.0, 0.3, ds.train_y.shape),
            val_y=rng.normal(0.0, 0.3, ds.val_y.shape))
        cfg = dataclasses.replace(FAST, epochs=30, patience=3)
        res = training.train(cfg, noisy, seed=11)
        distinct = sorted({row[1] for row in res.curve}, reverse=True)
        assert len(distinct) >= 2
        assert distinct[0] == pytest.approx(cfg.lr)
        for prev, nxt in zip(distinct, distinct[1:]):
            assert nxt / prev == pytest.approx(cfg.decay)


class TestInit:
    def test_layer_bounds_and_zero_biases(self):
        g = torch.Generator().manual_seed(4)
        model = training._Siren((4, 64, 64, 2), 30.0, g)
        first = model.hidden[0]
        b1 = 1.0 / 4.0
        w = first.weight.detach().numpy()
        assert np.all(np.abs(w) <= b1)
        assert np.max(np.abs(w)) > 0.8 * b1
        for lin in [*model.hidden[1:], model.final]:
            bound = math.sqrt(6.0 / lin.weight.shape[1]) / 30.0
            w = lin.weight.detach().numpy()
            assert np.all(np.abs(w) <= bound)
            assert np.max(np.abs(w)) > 0.8 * bound
        for lin in [*model.hidden, model.final]:
            assert float(lin.bias.detach().abs().max()) == 0.0


class TestExport:
    def test_doc_structure(self, result):
        doc = result.weights
        assert set(doc) == {"input_scale", "output_scale",
                            "normalize_output", "layers"}
        assert doc["normalize_output"] is False
        assert [l["type"] for l in doc["layers"]] == \
            ["siren", "siren", "siren", "linear"]
        assert all("omega" in l for l in doc["layers"][:-1])
        assert "omega" not in doc["layers"][-1]
        assert doc["output_scale"] == {"offset": [0.0, 0.0],
                                       "scale": [1.0, 1.0]}
        assert len(doc["input_scale"]["offset"]) == 4

    def test_normalize_flag_respected(self, ds):
        cfg = dataclasses.replace(FAST, epochs=1)
        res = training.train(cfg, ds, seed=11, normalize=True)
        assert res.weights["normalize_output"] is True

    def test_written_file_is_the_doc(self, ds, tmp_path):
        cfg = dataclasses.replace(FAST, epochs=1)
        path = tmp_path / "w.json"
        res = training.train(cfg, ds, seed=11, weights_path=path)
        assert json.loads(path.read_text()) == res.weights

    def test_curve_csv(self, ds, tmp_path):
        cfg = dataclasses.replace(FAST, epochs=3)
        path = tmp_path / "curve.csv"
        training.train(cfg, ds, seed=11, curve_path=path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["epoch", "lr", "train_mse", "val_mse"]
        assert len(rows) == 4
        assert [int(r[0]) for r in rows[1:]] == [1, 2, 3]
        assert all(float(v) > 0.0 for r in rows[1:] for v in r[1:])

    def test_primary_verifier_loads_and_agrees(self, ds, result, tmp_path):
        ct = pytest.importorskip("safemap.controllers")
        path = tmp_path / "w.json"
        with open(path, "w") as fh:
            json.dump(result.weights, fh)
        net = ct.load(path)
        assert net.input_dim == 4 and net.output_dim == 2
        # the verifier's forward pass must reproduce this kit's val loss
        preds = np.array([ct.forward(net, list(x)) for x in ds.val_x])
        mse = float(np.mean((preds - ds.val_y) ** 2))
        assert mse == pytest.approx(result.val_mse, rel=1e-3, abs=1e-9)


class TestCli:
    def _write_config(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cw_doc()))
        return path

    def test_full_run(self, tmp_path, capsys):
        cfg = self._write_config(tmp_path)
        out = tmp_path / "weights.json"
        curve = tmp_path / "curve.csv"
        rc = cli.main(["--config", str(cfg), "--out", str(out),
                       "--curve", str(curve), "--toy",
                       "--sizes", "256,64,16", "--epochs", "4",
                       "--seed", "1"])
        assert rc == 0
        assert "baseline" in capsys.readouterr().out
        doc = json.loads(out.read_text())
        assert [l["type"] for l in doc["layers"]] == \
            ["siren", "siren", "siren", "linear"]
        assert len(list(csv.reader(curve.open()))) == 5

    def test_layers_override(self, tmp_path):
        cfg = self._write_config(tmp_path)
        out = tmp_path / "weights.json"
        rc = cli.main(["--config", str(cfg), "--out", str(out),
                       "--layers", "8,8", "--epochs", "2",
                       "--batch", "64", "--lr", "1e-3",
                       "--k", "4", "--sizes", "128,32,8"])
        assert rc == 0
        doc = json.loads(out.read_text())
        assert [l["type"] for l in doc["layers"]] == ["siren", "siren",
                                                      "linear"]
        assert len(doc["layers"][0]["W"]) == 8

    def test_missing_config_is_a_usage_error(self, tmp_path):
        rc = cli.main(["--config", str(tmp_path / "absent.json"),
                       "--out", str(tmp_path / "w.json")])
        assert rc == 2

    def test_bad_sizes_is_a_usage_error(self, tmp_path):
        cfg = self._write_config(tmp_path)
        rc = cli.main(["--config", str(cfg),
                       "--out", str(tmp_path / "w.json"),
                       "--sizes", "10,5"])
        assert rc == 2
