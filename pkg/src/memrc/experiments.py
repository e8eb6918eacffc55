"""Benchmark runs and nonideality sweeps.

Every function takes an :class:`ExperimentConfig`, optionally writes its
artifacts (CSV tables, SVG plots, a JSON summary and the resolved config)
into an output directory, and returns a :class:`RunSummary` or a table.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .config import ExperimentConfig
from .csvio import write_csv, write_text_atomic
from .devicesim import (
    PulseSpec,
    dm_sixteen_states,
    nvm_iv_trace,
    nvm_pulse_response,
    write_pulse_response_csv,
    write_transient_csv,
)
from .errors import DataError
from .metrics import confusion, nrmse
from .plotting import PlotSpec, Series, emit_svg
from .readout import (
    REGION_PRESETS,
    apply_d2d,
    build_readout,
    clip_region,
    forward,
    train,
    write_training_log,
    write_weights_csv,
)
from .reservoir import reservoir_states, run_steps
from .signalio import (
    delay_embed,
    fit_standardizer,
    load_fsdd_dir,
    load_mfcc_npz,
    mackey_glass,
    mfcc,
    pad_frames,
    resample,
    split,
    standardize,
    write_series_csv,
)

N_CLASSES = 10


@dataclass
class RunSummary:
    history: list[dict]
    final: dict
    config_hash: str
    wall_clock: float = 0.0
    confusion: list | None = None
    nrmse: float | None = None
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        body = {
            "final": self.final,
            "nrmse": self.nrmse,
            "confusion": self.confusion,
            "config_hash": self.config_hash,
            "wall_clock_s": round(self.wall_clock, 3),
            "epochs": len(self.history) - 1,
            **self.extra,
        }
        return json.dumps(body, indent=2, sort_keys=True) + "\n"


def _archive(cfg: ExperimentConfig, out: Path | None):
    if out is not None:
        cfgmod.save(cfg, out / "config.ini")


def _finish(summary: RunSummary, out: Path | None, t0: float) -> RunSummary:
    summary.wall_clock = time.perf_counter() - t0
    if out is not None:
        write_text_atomic(out / "summary.json", summary.to_json())
    return summary


def _curve_plot(history, keys, title, ylabel) -> PlotSpec:
    epochs = np.array([h["epoch"] for h in history], float)
    series = []
    for k in keys:
        vals = [h.get(k) for h in history]
        if all(v is not None for v in vals):
            series.append(Series(epochs, np.array(vals, float), k))
    return PlotSpec(title=title, xlabel="epoch", ylabel=ylabel, series=series)


# --------------------------------------------------------------------------
# FSDD
# --------------------------------------------------------------------------


@dataclass
class FsddData:
    """Reservoir rows (standardized with train stats), one-hot targets and the split."""

    x: np.ndarray
    targets: np.ndarray
    train_idx: np.ndarray
    val_idx: np.ndarray


def _truncate(n: int, keep_fraction: float) -> int:
    return max(1, int(math.ceil(n * keep_fraction)))


def load_fsdd_frames(cfg: ExperimentConfig):
    """Per-utterance MFCC frame matrices (padded/truncated) and labels.

    ``cfg.run.data`` is either a directory of FSDD WAV files or an .npz of
    precomputed MFCC frames.  ``keep_fraction`` truncates every utterance
    (samples for audio, frames for precomputed features) before padding.
    """
    path = Path(cfg.run.data)
    keep = cfg.run.keep_fraction
    mf = cfg.mfcc
    if path.is_dir():
        frames, labels = [], []
        for clip in load_fsdd_dir(path):
            clip = resample(clip, mf.sample_rate)
            n = _truncate(len(clip.samples), keep)
            clip = replace(clip, samples=clip.samples[:n])
            frames.append(mfcc(clip, mf))
            labels.append(clip.label)
        return np.array(frames), np.array(labels, dtype=int)
    if path.suffix == ".npz":
        seqs, labels = load_mfcc_npz(path)
        if seqs and seqs[0].shape[1] != mf.n_coeffs:
            raise DataError(f"{path}: {seqs[0].shape[1]} coefficients per frame, config expects {mf.n_coeffs}")
        frames = [pad_frames(s[: _truncate(len(s), keep)], mf.max_frames) for s in seqs]
        return np.array(frames), labels
    raise DataError(
        f"FSDD data {str(path)!r} not found; expected a directory of "
        "'{digit}_{speaker}_{index}.wav' recordings or an .npz with arrays X, y, lengths"
    )


def prepare_fsdd(cfg: ExperimentConfig, seed: int | None = None) -> FsddData:
    seeds = cfg.seeds(seed)
    frames, labels = load_fsdd_frames(cfg)
    if cfg.run.max_samples and cfg.run.max_samples < len(labels):
        keep = np.sort(np.random.default_rng(seeds["split"] + 1).permutation(len(labels))[: cfg.run.max_samples])
        frames, labels = frames[keep], labels[keep]
    features = frames.reshape(len(frames), -1)
    tr, va = split(len(labels), cfg.run.train_fraction, seeds["split"])
    z = standardize(features, fit_standardizer(features[tr]))
    rcfg = replace(cfg.reservoir, dm_params=cfg.dm, seed=seeds["mask"])
    if z.shape[1] != rcfg.mask_length:
        raise DataError(f"feature length {z.shape[1]} does not match mask_length {rcfg.mask_length}")
    rows = reservoir_states(z, rcfg).rows()
    x = standardize(rows, fit_standardizer(rows[tr]))
    targets = np.eye(N_CLASSES)[labels]
    return FsddData(x, targets, tr, va)


def train_fsdd(cfg: ExperimentConfig, data: FsddData, seed: int | None = None,
               sigma: float | None = None, region=None):
    """Build and train the crossbar readout on prepared reservoir rows."""
    seeds = cfg.seeds(seed)
    ro = cfg.readout
    model = build_readout(data.x.shape[1], ro.n_hidden, N_CLASSES, "softmax", ro.pulse_model(),
                          ro.weight_range, seeds["init"], cfg.run.ideal_weights)
    sigma = cfg.nonideality.d2d_sigma if sigma is None else sigma
    if sigma > 0:
        model = apply_d2d(model, sigma, seeds["d2d"])
    region = cfg.nonideality.region if region is None else region
    if region is not None:
        model = clip_region(model, region)
    tr, va = data.train_idx, data.val_idx
    history = train(model, data.x[tr], data.targets[tr], ro.train_config(cfg.run.epochs, seeds["shuffle"]),
                    data.x[va], data.targets[va])
    return model, history


def run_fsdd(cfg: ExperimentConfig, out=None, data: FsddData | None = None) -> RunSummary:
    t0 = time.perf_counter()
    out = Path(out) if out is not None else None
    _archive(cfg, out)
    data = prepare_fsdd(cfg) if data is None else data
    model, history = train_fsdd(cfg, data)
    va = data.val_idx
    pred = forward(model, data.x[va])
    cm = confusion(pred, data.targets[va], N_CLASSES)
    final = {k: history[-1][k] for k in ("train_loss", "train_acc", "val_loss", "val_acc")}
    summary = RunSummary(history, final, cfg.hash(), confusion=cm.tolist(),
                         extra={"n_train": int(len(data.train_idx)), "n_val": int(len(va))})
    if out is not None:
        write_training_log(out / "training_log.csv", history)
        write_csv(out / "confusion.csv", ["true"] + [f"pred{j}" for j in range(N_CLASSES)],
                  ([i, *cm[i]] for i in range(N_CLASSES)))
        write_weights_csv(out / "weights_layer1.csv", model.layer1)
        write_weights_csv(out / "weights_layer2.csv", model.layer2)
        emit_svg(out / "accuracy.svg", _curve_plot(history, ["train_acc", "val_acc"], "FSDD accuracy", "accuracy"))
        emit_svg(out / "loss.svg", _curve_plot(history, ["train_loss", "val_loss"], "FSDD loss", "loss"))
    return _finish(summary, out, t0)


def _aggregate(rows, key_name, keys):
    table = []
    for key in keys:
        sel = [r for r in rows if r[key_name] == key]
        tr = np.array([r["train_acc"] for r in sel])
        va = np.array([r["val_acc"] for r in sel])
        table.append({key_name: key, "n": len(sel), "train_mean": tr.mean(), "train_std": tr.std(),
                      "val_mean": va.mean(), "val_std": va.std()})
    return table


def _write_dicts(path, rows, cols):
    write_csv(path, cols, ([r[c] for c in cols] for r in rows))


def sweep_d2d(cfg: ExperimentConfig, out=None, sigmas=None, n_seeds: int | None = None) -> dict:
    """Final accuracies per (sigma, seed) plus mean/std per sigma."""
    t0 = time.perf_counter()
    out = Path(out) if out is not None else None
    _archive(cfg, out)
    sigmas = tuple(cfg.run.sigmas if sigmas is None else sigmas)
    n_seeds = cfg.run.n_seeds if n_seeds is None else n_seeds
    rows = []
    for i in range(n_seeds):
        seed = cfg.run.seed + i
        data = prepare_fsdd(cfg, seed)
        for sigma in sigmas:
            _, hist = train_fsdd(cfg, data, seed, sigma=sigma)
            rows.append({"sigma": sigma, "seed": seed, "train_acc": hist[-1]["train_acc"],
                         "val_acc": hist[-1]["val_acc"]})
    rows.sort(key=lambda r: (r["sigma"], r["seed"]))
    table = _aggregate(rows, "sigma", sigmas)
    if out is not None:
        _write_dicts(out / "d2d_runs.csv", rows, ["sigma", "seed", "train_acc", "val_acc"])
        _write_dicts(out / "d2d_summary.csv", table,
                     ["sigma", "n", "train_mean", "train_std", "val_mean", "val_std"])
        s = np.array(sigmas, float)
        emit_svg(out / "d2d.svg", PlotSpec(
            title="Accuracy vs D2D variation", xlabel="sigma", ylabel="accuracy",
            series=[Series(s, np.array([t["train_mean"] for t in table]), "train"),
                    Series(s, np.array([t["val_mean"] for t in table]), "validation")]))
        write_text_atomic(out / "summary.json", json.dumps(
            {"summary": table, "config_hash": cfg.hash(),
             "wall_clock_s": round(time.perf_counter() - t0, 3)}, indent=2, sort_keys=True) + "\n")
    return {"runs": rows, "summary": table}


def sweep_regions(cfg: ExperimentConfig, out=None, regions=None, n_seeds: int | None = None) -> dict:
    """Accuracy curves and finals for each conductance-region preset (or explicit interval)."""
    t0 = time.perf_counter()
    out = Path(out) if out is not None else None
    _archive(cfg, out)
    regions = tuple(cfg.run.regions if regions is None else regions)
    n_seeds = cfg.run.n_seeds if n_seeds is None else n_seeds
    bounds = {r: REGION_PRESETS[r] if isinstance(r, str) else tuple(r) for r in regions}
    names = [r if isinstance(r, str) else f"[{r[0]:g},{r[1]:g}]" for r in regions]
    rows, curves = [], []
    for i in range(n_seeds):
        seed = cfg.run.seed + i
        data = prepare_fsdd(cfg, seed)
        for name, r in zip(names, regions):
            lo, hi = bounds[r]
            _, hist = train_fsdd(cfg, data, seed, region=(lo, hi))
            rows.append({"region": name, "lo": lo, "hi": hi, "seed": seed,
                         "train_acc": hist[-1]["train_acc"], "val_acc": hist[-1]["val_acc"]})
            curves += [{"region": name, "seed": seed, "epoch": h["epoch"], "train_acc": h["train_acc"],
                        "val_acc": h["val_acc"]} for h in hist]
    order = {n: k for k, n in enumerate(names)}
    rows.sort(key=lambda r: (order[r["region"]], r["seed"]))
    curves.sort(key=lambda r: (order[r["region"]], r["seed"], r["epoch"]))
    table = _aggregate(rows, "region", names)
    if out is not None:
        _write_dicts(out / "region_runs.csv", rows, ["region", "lo", "hi", "seed", "train_acc", "val_acc"])
        _write_dicts(out / "region_curves.csv", curves, ["region", "seed", "epoch", "train_acc", "val_acc"])
        _write_dicts(out / "region_summary.csv", table,
                     ["region", "n", "train_mean", "train_std", "val_mean", "val_std"])
        series = []
        for name in names:
            sel = [c for c in curves if c["region"] == name]
            epochs = sorted({c["epoch"] for c in sel})
            mean = [np.mean([c["val_acc"] for c in sel if c["epoch"] == e]) for e in epochs]
            series.append(Series(np.array(epochs, float), np.array(mean), name))
        emit_svg(out / "regions.svg", PlotSpec(title="Validation accuracy per conductance region",
                                               xlabel="epoch", ylabel="accuracy", series=series))
        write_text_atomic(out / "summary.json", json.dumps(
            {"summary": table, "config_hash": cfg.hash(),
             "wall_clock_s": round(time.perf_counter() - t0, 3)}, indent=2, sort_keys=True) + "\n")
    return {"runs": rows, "summary": table, "curves": curves}


# --------------------------------------------------------------------------
# Mackey-Glass
# --------------------------------------------------------------------------


def run_mg(cfg: ExperimentConfig, out=None) -> RunSummary:
    """One-step-ahead forecasting x(n) -> x(n+1) on the subsampled series.

    The first ``train_fraction`` of the steps trains the readout; NRMSE is
    reported on the continuation.  With ``closed_loop`` the test inputs are
    the model's own previous predictions instead of the true series.
    """
    t0 = time.perf_counter()
    out = Path(out) if out is not None else None
    _archive(cfg, out)
    seeds = cfg.seeds()
    series = mackey_glass(cfg.mg)
    sub = series[:: cfg.run.mg_stride]
    u, target = sub[:-1], sub[1:]
    n_train = int(round(cfg.run.train_fraction * len(u)))
    mu, sd = float(u[:n_train].mean()), float(u[:n_train].std())
    rcfg = replace(cfg.mg_reservoir, dm_params=cfg.dm, seed=seeds["mask"])
    ml = rcfg.mask_length
    z = (u - mu) / sd
    tz = (target - mu) / sd

    state, w_end = run_steps(np.repeat(z[:n_train, None], ml, axis=1)[None], rcfg)
    train_rows = state.currents[0].reshape(n_train, -1)
    stats = fit_standardizer(train_rows)
    if cfg.run.closed_loop:
        test_rows = None
    else:
        full, _ = run_steps(np.repeat(z[:, None], ml, axis=1)[None], rcfg)
        test_rows = full.currents[0].reshape(len(z), -1)[n_train:]

    ro = cfg.readout
    model = build_readout(train_rows.shape[1], ro.n_hidden, 1, "linear", ro.pulse_model(),
                          ro.weight_range, seeds["init"], cfg.run.ideal_weights)
    if cfg.nonideality.d2d_sigma > 0:
        model = apply_d2d(model, cfg.nonideality.d2d_sigma, seeds["d2d"])
    if cfg.nonideality.region is not None:
        model = clip_region(model, cfg.nonideality.region)
    x_train = standardize(train_rows, stats)
    val = None if test_rows is None else standardize(test_rows, stats)
    history = train(model, x_train, tz[:n_train], ro.train_config(cfg.run.epochs, seeds["shuffle"]),
                    val, None if val is None else tz[n_train:])

    if test_rows is None:
        preds = []
        w = w_end
        # the first test input is the last observed value; afterwards feed back predictions
        inp = z[n_train]
        for _ in range(len(z) - n_train):
            st, w = run_steps(np.full((1, 1, ml), inp), rcfg, w0=w)
            p = float(forward(model, standardize(st.currents[0].reshape(1, -1), stats))[0, 0])
            preds.append(p)
            inp = p
        pred_z = np.array(preds)
    else:
        pred_z = forward(model, val)[:, 0]
    pred = pred_z * sd + mu
    truth = target[n_train:]
    score = nrmse(pred, truth)
    final = {k: history[-1].get(k) for k in ("train_loss", "val_loss")}
    final["nrmse"] = score
    final["nrmse_range"] = nrmse(pred, truth, "range")
    summary = RunSummary(history, final, cfg.hash(), nrmse=score,
                         extra={"n_train": n_train, "n_test": int(len(truth)),
                                "closed_loop": cfg.run.closed_loop})
    if out is not None:
        step = cfg.mg.dt * cfg.run.mg_stride
        write_series_csv(out / "series.csv", series, cfg.mg.dt)
        t_test = step * (np.arange(n_train, len(u)) + 1)
        write_csv(out / "predictions.csv", ["t", "target", "prediction"], zip(t_test, truth, pred))
        write_training_log(out / "training_log.csv", history)
        lag = max(1, int(round(cfg.mg.tau / step)))
        emb_t, emb_p = delay_embed(truth, lag), delay_embed(pred, lag)
        write_csv(out / "embedding.csv", ["source", "x_lagged", "x"],
                  [("target", a, b) for a, b in emb_t] + [("prediction", a, b) for a, b in emb_p])
        emit_svg(out / "prediction.svg", PlotSpec(
            title="Mackey-Glass one-step prediction", xlabel="t", ylabel="x",
            series=[Series(t_test, truth, "target"), Series(t_test, pred, "prediction")]))
        emit_svg(out / "embedding.svg", PlotSpec(
            title="Delay embedding", xlabel="x(t - tau)", ylabel="x(t)",
            series=[Series(emb_t[:, 0], emb_t[:, 1], "target", "scatter"),
                    Series(emb_p[:, 0], emb_p[:, 1], "prediction", "scatter")]))
        emit_svg(out / "loss.svg", _curve_plot(history, ["train_loss", "val_loss"], "Mackey-Glass loss", "MSE"))
    return _finish(summary, out, t0)


# --------------------------------------------------------------------------
# Device traces
# --------------------------------------------------------------------------

# 50 SET then 50 RESET pulses of 100 ms; long enough for the NVM state to move visibly
DEMO_SET = PulseSpec(2.5, 0.1, 50)
DEMO_RESET = PulseSpec(-2.5, 0.1, 50)


def device_demo(cfg: ExperimentConfig, out=None) -> dict:
    """NVM pulse response and I-V loop, DM sixteen-state currents."""
    t0 = time.perf_counter()
    out = Path(out) if out is not None else None
    _archive(cfg, out)
    pulses = nvm_pulse_response(cfg.nvm, DEMO_SET, DEMO_RESET)
    t, v, i, w = nvm_iv_trace(cfg.nvm)
    states = dm_sixteen_states(cfg.dm)
    if out is not None:
        write_pulse_response_csv(out / "nvm_pulse_response.csv", pulses)
        write_transient_csv(out / "nvm_hysteresis.csv", t, v, i, w)
        write_csv(out / "dm_states.csv", ["pattern", "current_A"], states)
        idx = np.array([p[0] for p in pulses], float)
        emit_svg(out / "nvm_pulse_response.svg", PlotSpec(
            title="NVM pulse response", xlabel="pulse", ylabel="conductance (S)",
            series=[Series(idx, np.array([p[1] for p in pulses]), "G")]))
        emit_svg(out / "nvm_hysteresis.svg", PlotSpec(
            title="NVM I-V", xlabel="V", ylabel="I (A)", series=[Series(v, i, "I-V")]))
        emit_svg(out / "dm_states.svg", PlotSpec(
            title="DM 4-bit stream states", xlabel="pattern (binary value)", ylabel="current (A)",
            series=[Series(np.array([int(p, 2) for p, _ in states], float),
                           np.array([c for _, c in states]), "read current", "scatter")]))
        write_text_atomic(out / "summary.json", json.dumps(
            {"n_pulses": len(pulses), "n_states": len(states), "config_hash": cfg.hash(),
             "wall_clock_s": round(time.perf_counter() - t0, 3)}, indent=2, sort_keys=True) + "\n")
    return {"pulse_response": pulses, "iv": (t, v, i, w), "dm_states": states}
