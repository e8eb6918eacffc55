"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the report lines.
"""

import math
import time

import numpy as np

from memrc import config as cfgmod
from memrc.devicesim import (
    DEFAULT_DM_PULSE,
    DmParams,
    DmState,
    NvmParams,
    PulseSpec,
    dm_pulse_stream_state,
    dm_sixteen_states,
    dm_step,
    nvm_iv_trace,
    nvm_pulse_response,
)
from memrc.experiments import device_demo, run_fsdd, run_mg, sweep_d2d, sweep_regions
from memrc.readout import (
    PulseUpdateModel,
    build_readout,
    conductance_ltd,
    conductance_ltp,
    forward,
    loss_and_grads,
    vmm,
)
from memrc.signalio import MgParams, mackey_glass

SMOKE = {"epochs": 30, "max_samples": 600}


def report(capsys, number, name, ok, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {name}: {detail}")
    assert ok, detail


def fsdd_cfg(npz, **run):
    return cfgmod.ExperimentConfig().with_run(data=str(npz), **run)


def test_1_fsdd_benchmark(capsys, fsdd_npz):
    t0 = time.perf_counter()
    full = run_fsdd(fsdd_cfg(fsdd_npz))
    full_s = time.perf_counter() - t0
    t0 = time.perf_counter()
    smoke = run_fsdd(fsdd_cfg(fsdd_npz, **SMOKE))
    smoke_s = time.perf_counter() - t0
    f, s = full.final, smoke.final
    ok_full = f["train_acc"] >= 0.95 and f["val_acc"] >= 0.88 and full_s <= 30 * 60
    ok_smoke = s["val_acc"] >= 0.80 and smoke_s <= 180
    report(capsys, 1, "FSDD benchmark", ok_full and ok_smoke,
           f"full train={f['train_acc']:.4f} val={f['val_acc']:.4f} ({full_s:.0f} s, need >=0.95/>=0.88); "
           f"smoke val={s['val_acc']:.4f} ({smoke_s:.1f} s, need >=0.80 in <=180 s)")


def test_2_mackey_glass(capsys):
    t0 = time.perf_counter()
    s = run_mg(cfgmod.ExperimentConfig().with_run(task="mackey-glass"))
    elapsed = time.perf_counter() - t0
    report(capsys, 2, "Mackey-Glass NRMSE", s.nrmse <= 0.08 and elapsed <= 300,
           f"nrmse={s.nrmse:.4f} (need <=0.08) in {elapsed:.0f} s")


def test_3_sixteen_states(capsys):
    cur = np.array([c for _, c in dm_sixteen_states()])
    gap = np.diff(np.sort(cur)).min()
    span = np.ptp(cur)
    ok = len(cur) == 16 and len(set(cur)) == 16 and gap > 1e-3 * span
    report(capsys, 3, "sixteen distinct DM states", ok, f"min gap / span = {gap / span:.4g} (need >1e-3)")


def test_4_endpoint_identities(capsys):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        x_min = rng.uniform(0, 1e-5)
        m = PulseUpdateModel(x_min, x_min + rng.uniform(1e-7, 3e-5), float(rng.integers(1, 500)),
                             rng.uniform(1, 200) * rng.choice([-1, 1]))
        for got, want in ((conductance_ltp(0, m), m.x_min), (conductance_ltp(m.p_max, m), m.x_max),
                          (conductance_ltd(0, m), m.x_min), (conductance_ltd(m.p_max, m), m.x_max)):
            # x_min can be exactly 0; measure relative to the curve's span then
            worst = max(worst, abs(got - want) / max(abs(want), m.x_max - m.x_min))
    report(capsys, 4, "LTP/LTD endpoint identities", worst <= 1e-12, f"max relative error {worst:.3g}")


def test_5_d2d_trend(capsys, fsdd_npz):
    res = sweep_d2d(fsdd_cfg(fsdd_npz, **SMOKE), sigmas=(0.05, 0.10, 0.15, 0.20, 0.25, 0.30), n_seeds=5)
    means = [row["val_mean"] for row in res["summary"]]
    monotone = all(b <= a for a, b in zip(means, means[1:]))
    drop = means[0] - means[-1]
    report(capsys, 5, "D2D accuracy trend", monotone and drop >= 0.02,
           "val means " + ", ".join(f"{m:.4f}" for m in means) + f"; drop {100 * drop:.1f} points (need >=2)")


def test_6_region_ordering(capsys, fsdd_npz):
    res = sweep_regions(fsdd_cfg(fsdd_npz, **SMOKE), regions=("R1", "R2", "R3"), n_seeds=5)
    val = [row["val_mean"] for row in res["summary"]]
    tr = [row["train_mean"] for row in res["summary"]]
    ok = val[0] >= val[1] >= val[2] and tr[0] >= tr[1] >= tr[2]
    report(capsys, 6, "region ordering R1>=R2>=R3", ok,
           f"val {val[0]:.4f} / {val[1]:.4f} / {val[2]:.4f}; train {tr[0]:.4f} / {tr[1]:.4f} / {tr[2]:.4f}")


def _euler(rate, w, v, duration, dt, lo, hi):
    for _ in range(int(round(duration / dt))):
        w = min(max(w + dt * rate(w, v), lo), hi)
    return w


def test_7_numerical_oracles(capsys):
    details = []
    # device traces against fine-step Euler
    dm = DmParams()
    pulse = DEFAULT_DM_PULSE
    dt = pulse.width / 10

    def dm_rate(w, v):
        return dm.lam * math.sinh(dm.eta * v) - w / dm.tau

    def dm_read(w, v=0.5):
        return (1 - w) * dm.alpha * (1 - math.exp(-dm.beta * v)) + w * dm.gamma * math.sinh(dm.delta * v)

    dm_err = 0.0
    for bits in ("1011", "0110", "1111"):
        w = 0.0
        for b in bits:
            w = _euler(dm_rate, w, pulse.amplitude if b == "1" else 0.0, pulse.width, dt / 100, 0.0, 1.0)
            w = _euler(dm_rate, w, 0.0, pulse.inter_pulse_gap, dt / 100, 0.0, 1.0)
        ref = dm_read(w)
        dm_err = max(dm_err, abs(dm_pulse_stream_state(dm, bits, dt=dt) - ref) / ref)

    nvm = NvmParams()
    set_p, reset_p = PulseSpec(2.5, 0.1, 20), PulseSpec(-2.5, 0.1, 20)
    ndt = set_p.width / 10

    def nvm_rate(w, v):
        if nvm.v_t_minus <= v <= nvm.v_t_plus:
            return 0.0
        x = w / nvm.d
        i = v / (nvm.r_on * x + nvm.r_off * (1 - x))
        k = nvm.drift_scale * nvm.mu_v * nvm.r_on / nvm.d
        drive = nvm.i_off / (i - nvm.i_0) if v > nvm.v_t_plus else i / nvm.i_on
        return k * drive * (1 - (2 * x - 1) ** (2 * nvm.p))

    rk = np.array([c for _, c in nvm_pulse_response(nvm, set_p, reset_p, dt=ndt)])
    w = 0.05 * nvm.d
    ref = []
    for p in (set_p, reset_p):
        for _ in range(p.count):
            w = _euler(nvm_rate, w, p.amplitude, p.width, ndt / 100, 0.0, nvm.d)
            x = w / nvm.d
            ref.append(1 / (nvm.r_on * x + nvm.r_off * (1 - x)))
    nvm_err = float(np.max(np.abs(rk - ref) / np.array(ref)))
    details.append(f"RK4 vs Euler rel err DM {dm_err:.2g}, NVM {nvm_err:.2g} (<=1e-4)")

    # VMM and forward pass against naive loops
    rng = np.random.default_rng(7)
    model = build_readout(40, 64, 10, seed=7)
    w1, w2 = model.layer1.weights, model.layer2.weights
    x = rng.normal(size=40)
    naive = [sum(w1[j, k] * x[j] for j in range(40)) for k in range(64)]
    vmm_err = np.max(np.abs(vmm(model.layer1, x) - naive)) / np.max(np.abs(naive))
    h = [max(v, 0.0) for v in naive]
    z = [sum(w2[j, k] * h[j] for j in range(64)) for k in range(10)]
    e = [math.exp(v - max(z)) for v in z]
    probs = np.array([v / sum(e) for v in e])
    fwd_err = np.max(np.abs(forward(model, x) - probs) / probs)
    details.append(f"VMM {vmm_err:.2g}, forward {fwd_err:.2g} (<=1e-10)")

    # backprop against central differences
    ws = [rng.normal(size=(6, 5)), rng.normal(size=(5, 4))]
    xb = rng.normal(size=(10, 6))
    tb = np.eye(4)[rng.integers(4, size=10)]
    _, grads = loss_and_grads(ws, xb, tb)
    grad_err = 0.0
    for layer in range(2):
        num = np.zeros_like(ws[layer])
        for idx in np.ndindex(*ws[layer].shape):
            hi = [a.copy() for a in ws]
            lo = [a.copy() for a in ws]
            hi[layer][idx] += 1e-6
            lo[layer][idx] -= 1e-6
            num[idx] = (loss_and_grads(hi, xb, tb)[0] - loss_and_grads(lo, xb, tb)[0]) / 2e-6
        grad_err = max(grad_err, np.max(np.abs(grads[layer] - num)) / np.max(np.abs(num)))
    details.append(f"gradients {grad_err:.2g} (<=1e-4)")
    ok = dm_err <= 1e-4 and nvm_err <= 1e-4 and vmm_err <= 1e-10 and fwd_err <= 1e-10 and grad_err <= 1e-4
    report(capsys, 7, "numerical oracles", ok, "; ".join(details))


def test_8_analytic_checks(capsys):
    dm = DmParams()
    w0, dt = 0.8, 1e-3
    s = DmState(w0)
    ts = np.arange(1, 101) * dt
    decay_err = 0.0
    for t in ts:
        s = dm_step(s, dm, 0.0, dt)
        decay_err = max(decay_err, abs(s.w - w0 * math.exp(-t / dm.tau)))
    x = mackey_glass(MgParams(beta=0.2, gamma=0.1, n=10, x0=1.0, n_steps=5000, washout=0))
    mg_err = float(np.max(np.abs(x - 1.0)))
    _, v, i, _ = nvm_iv_trace(NvmParams())
    pinched = bool(np.any(v == 0) and np.all(i[v == 0] == 0))
    ok = decay_err <= 1e-6 and mg_err <= 1e-9 and pinched
    report(capsys, 8, "analytic physics checks", ok,
           f"DM decay err {decay_err:.2g} (<=1e-6), MG fixed point drift {mg_err:.2g} (<=1e-9), "
           f"NVM pinched at origin: {pinched}")


def test_9_determinism(capsys, tmp_path, fsdd_npz):
    names = {"fsdd": ["training_log.csv", "confusion.csv", "weights_layer1.csv", "weights_layer2.csv"],
             "demo": ["nvm_pulse_response.csv", "nvm_hysteresis.csv", "dm_states.csv"],
             "mg": ["series.csv", "predictions.csv", "training_log.csv", "embedding.csv"]}
    base = cfgmod.ExperimentConfig()
    mismatched = []
    for run in ("a", "b"):
        run_fsdd(fsdd_cfg(fsdd_npz, epochs=3, max_samples=300, seed=11), tmp_path / run / "fsdd")
        device_demo(base, tmp_path / run / "demo")
        run_mg(base.with_run(task="mackey-glass", epochs=3, seed=11), tmp_path / run / "mg")
    for kind, files in names.items():
        for f in files:
            if (tmp_path / "a" / kind / f).read_bytes() != (tmp_path / "b" / kind / f).read_bytes():
                mismatched.append(f"{kind}/{f}")
    count = sum(len(v) for v in names.values())
    report(capsys, 9, "determinism", not mismatched,
           f"{count - len(mismatched)}/{count} CSV files byte-identical" + (f"; differ: {mismatched}" if mismatched else ""))
