import json

import numpy as np
import pytest

from memrc import config as cfgmod
from memrc.cli import main
from memrc.csvio import read_csv
from memrc.errors import ConfigurationError, InputError
from memrc.experiments import device_demo, prepare_fsdd, run_fsdd, sweep_d2d, sweep_regions, train_fsdd
from memrc.metrics import accuracy, confusion, nrmse
from memrc.plotting import PlotSpec, Series, emit_svg, render_svg, table_plot


def small_cfg(npz, **run):
    opts = {"data": str(npz), "max_samples": 200, "epochs": 2}
    opts.update(run)
    return cfgmod.ExperimentConfig().with_run(**opts)


# --- config ---


def test_config_round_trip(tmp_path):
    cfg = cfgmod.ExperimentConfig().with_run(seed=7, epochs=12, ideal_weights=True, sigmas=(0.1, 0.2))
    cfg = cfgmod.loads("[nonideality]\nregion = R2\nd2d_sigma = 0.1\n", cfg)
    assert cfg.nonideality.region == (-1.20e-5, 0.30e-5)
    path = cfgmod.save(cfg, tmp_path / "c.ini")
    again = cfgmod.load(path)
    assert again == cfg and again.hash() == cfg.hash()
    assert cfgmod.dumps(again) == path.read_text()


def test_config_partial_and_errors(tmp_path):
    cfg = cfgmod.loads("[run]\nepochs = 3\n")
    assert cfg.run.epochs == 3 and cfg.reservoir == cfgmod.ExperimentConfig().reservoir
    for text in ("[run]\nbogus = 1\n", "[nowhere]\nx = 1\n", "[run]\nepochs = many\n",
                 "[run]\nkeep_fraction = 1.5\n", "[readout]\nx_min = 1\nx_max = 0\n", "not ini"):
        with pytest.raises(ConfigurationError):
            cfgmod.loads(text)
    with pytest.raises(ConfigurationError):
        cfgmod.load(tmp_path / "missing.ini")


def test_seeds_are_distinct_and_stable():
    s = cfgmod.ExperimentConfig().seeds(3)
    assert len(set(s.values())) == 5 and s == cfgmod.ExperimentConfig().seeds(3)
    assert s != cfgmod.ExperimentConfig().seeds(4)


# --- metrics ---


def test_metrics_perfect_and_mean():
    y = np.array([0, 1, 2, 2, 1, 0, 2])
    assert accuracy(y, y) == 1.0
    cm = confusion(y, y, 3)
    assert np.array_equal(cm, np.diag(np.bincount(y)))
    t = np.random.default_rng(0).normal(size=50)
    assert nrmse(t, t) == 0.0
    assert nrmse(np.full(50, t.mean()), t) == pytest.approx(1.0, rel=1e-12)
    assert nrmse(t + 1, t, "range") == pytest.approx(1 / (t.max() - t.min()))


def test_confusion_row_sums_and_accuracy_argmax():
    rng = np.random.default_rng(1)
    y, p = rng.integers(4, size=100), rng.integers(4, size=100)
    cm = confusion(p, y, 4)
    assert np.array_equal(cm.sum(1), np.bincount(y, minlength=4)) and cm.sum() == 100
    assert accuracy(np.eye(4)[p], np.eye(4)[y]) == np.mean(p == y)


def test_metric_errors():
    with pytest.raises(InputError):
        accuracy([], [])
    with pytest.raises(InputError):
        nrmse([1.0, 2.0], [1.0])
    with pytest.raises(InputError):
        nrmse([1.0, 2.0], [1.0, 1.0])


# --- SVG ---


def test_svg_two_points_and_determinism(tmp_path):
    spec = PlotSpec(title="t", xlabel="x", ylabel="y", series=[Series(np.array([0.0, 1.0]), np.array([1.0, 3.0]), "a")])
    a = emit_svg(tmp_path / "a.svg", spec).read_bytes()
    b = emit_svg(tmp_path / "b.svg", spec).read_bytes()
    assert a == b and a.startswith(b"<svg") and a.count(b"<polyline") == 1
    scatter = PlotSpec(series=[Series(np.arange(3.0), np.arange(3.0), "s", "scatter")])
    assert render_svg(scatter).count("<circle") == 3


def test_svg_empty_errors():
    with pytest.raises(InputError):
        render_svg(PlotSpec(series=[]))
    with pytest.raises(InputError):
        table_plot(["x", "y"], [], "x", ["y"])
    with pytest.raises(InputError):
        table_plot(["x", "y"], [["1", "2"]], "x", ["z"])


# --- CLI ---


def test_cli_usage_and_data_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as err:
        main(["fsdd", "--epochs", "lots"])
    assert err.value.code == 1
    with pytest.raises(SystemExit) as err:
        main([])
    assert err.value.code == 1
    assert main(["fsdd", "--keep-fraction", "0", "--out", str(tmp_path)]) == 1
    bad = tmp_path / "bad.ini"
    bad.write_text("[run]\nunknown = 1\n")
    assert main(["fsdd", "--config", str(bad)]) == 1
    assert main(["fsdd", "--data", str(tmp_path / "nothing"), "--out", str(tmp_path / "o")]) == 2
    assert main(["plot", str(tmp_path / "none.csv"), "--x", "a", "--y", "b", "--out", str(tmp_path / "p.svg")]) == 2


def test_cli_device_demo_and_plot(tmp_path, capsys):
    out = tmp_path / "demo"
    assert main(["device-demo", "--out", str(out)]) == 0
    header, rows = read_csv(out / "dm_states.csv")
    assert header == ["pattern", "current_A"] and len(rows) == 16
    assert len({r[1] for r in rows}) == 16
    assert main(["plot", str(out / "dm_states.csv"), "--x", "current_A", "--y", "current_A",
                 "--out", str(tmp_path / "p.svg"), "--scatter"]) == 0
    assert (tmp_path / "p.svg").read_text().count("<circle") == 16
    assert cfgmod.load(out / "config.ini").run.task == "device-demo"


def test_device_demo_traces():
    res = device_demo(cfgmod.ExperimentConfig())
    t, v, i, w = res["iv"]
    assert np.all(i[v == 0] == 0) and np.any(v == 0)
    g = np.array([p[1] for p in res["pulse_response"]])
    n = len(g) // 2
    assert np.all(np.diff(g[:n]) >= 0) and np.all(np.diff(g[n:]) <= 0)
    assert g[n - 1] > g[0] and g[-1] < g[n - 1]


# --- runs ---


def test_fsdd_run_outputs_and_determinism(tmp_path, fsdd_npz):
    cfg = small_cfg(fsdd_npz)
    a = run_fsdd(cfg, tmp_path / "a")
    b = run_fsdd(cfg, tmp_path / "b")
    for name in ("training_log.csv", "confusion.csv", "weights_layer1.csv", "weights_layer2.csv",
                 "config.ini", "accuracy.svg", "loss.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
    assert a.final == b.final and a.confusion == b.confusion and a.config_hash == b.config_hash
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert summary["n_train"] == 150 and summary["n_val"] == 50
    assert np.sum(a.confusion) == 50
    rerun = run_fsdd(cfgmod.load(tmp_path / "a" / "config.ini"))
    assert rerun.final == a.final


def test_fsdd_untrained_is_chance(fsdd_npz):
    cfg = small_cfg(fsdd_npz, max_samples=0, epochs=0)
    s = run_fsdd(cfg)
    assert len(s.history) == 1
    assert 0.02 <= s.final["val_acc"] <= 0.25


def test_keep_fraction_changes_features(fsdd_npz):
    full = prepare_fsdd(small_cfg(fsdd_npz))
    cut = prepare_fsdd(small_cfg(fsdd_npz, keep_fraction=0.5))
    assert full.x.shape == cut.x.shape and not np.array_equal(full.x, cut.x)


def test_sweep_shapes_and_zero_sigma_baseline(tmp_path, fsdd_npz):
    cfg = small_cfg(fsdd_npz, epochs=1)
    res = sweep_d2d(cfg, tmp_path, sigmas=(0.0, 0.1, 0.3), n_seeds=2)
    assert len(res["runs"]) == 6 and len(res["summary"]) == 3
    base = train_fsdd(cfg, prepare_fsdd(cfg, cfg.run.seed), cfg.run.seed)[1][-1]
    row = [r for r in res["runs"] if r["sigma"] == 0.0 and r["seed"] == cfg.run.seed][0]
    assert row["val_acc"] == base["val_acc"] and row["train_acc"] == base["train_acc"]
    header, rows = read_csv(tmp_path / "d2d_summary.csv")
    assert header[:2] == ["sigma", "n"] and len(rows) == 3


def test_region_sweep_tables(tmp_path, fsdd_npz):
    cfg = small_cfg(fsdd_npz, epochs=1)
    res = sweep_regions(cfg, tmp_path, n_seeds=1)
    assert [r["region"] for r in res["summary"]] == ["R1", "R2", "R3"]
    assert len(res["curves"]) == 3 * 2
    header, _ = read_csv(tmp_path / "region_curves.csv")
    assert header == ["region", "seed", "epoch", "train_acc", "val_acc"]
