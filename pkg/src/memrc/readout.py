"""Memristive crossbar readout.

Signed weights are differential conductance pairs ``g_pos - g_neg``.  Each
device follows the saturating pulse-number/conductance curves (LTP when
potentiated, LTD when depressed).  Training keeps a float copy of the
weights for backpropagation and Adam; every optimizer step is then
programmed into the device pairs, so what the hardware ends up holding is
distorted by the update nonlinearity, saturation, device-to-device spread
and any conductance-region limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .csvio import write_csv
from .errors import ConfigurationError, InputError, NumericalError

__all__ = [
    "PulseUpdateModel",
    "CrossbarDevice",
    "DeviceArray",
    "Crossbar",
    "ReadoutModel",
    "NonidealitySpec",
    "TrainConfig",
    "REGION_PRESETS",
    "scale_factor_b",
    "conductance_ltp",
    "conductance_ltd",
    "pulses_ltp",
    "pulses_ltd",
    "program_weight_update",
    "vmm",
    "relu",
    "softmax",
    "forward",
    "loss_and_grads",
    "build_readout",
    "apply_d2d",
    "clip_region",
    "train",
    "evaluate",
    "write_weights_csv",
    "write_training_log",
]


# --------------------------------------------------------------------------
# Pulse-number / conductance curves
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PulseUpdateModel:
    x_min: float = 0.0
    x_max: float = 2e-5
    p_max: float = 100.0
    a: float = 30.0

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ConfigurationError("need x_min < x_max")
        if not self.p_max >= 1:
            raise ConfigurationError("p_max must be >= 1")
        if self.a == 0:
            raise ConfigurationError("nonlinearity a must be nonzero")


def _b(x_min, x_max, p_max, a):
    return (x_max - x_min) / -np.expm1(-p_max / a)


def scale_factor_b(model: PulseUpdateModel) -> float:
    """B = (x_max - x_min) / (1 - exp(-p_max / a))."""
    return float(_b(model.x_min, model.x_max, model.p_max, model.a))


def _check_pulses(p, p_max):
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or np.any(p > p_max):
        raise InputError(f"pulse count must lie in [0, {p_max}]")
    return p


def _ltp(p, x_min, x_max, p_max, a):
    return _b(x_min, x_max, p_max, a) * -np.expm1(-p / a) + x_min


def _ltd(p, x_min, x_max, p_max, a):
    return x_max + _b(x_min, x_max, p_max, a) * np.expm1((p - p_max) / a)


def _inv_ltp(g, x_min, x_max, p_max, a):
    b = _b(x_min, x_max, p_max, a)
    # the curve ends map to log1p(-1) = -inf; clipping brings them back to 0 or p_max
    with np.errstate(divide="ignore"):
        return np.clip(-a * np.log1p(-(g - x_min) / b), 0.0, p_max)


def _inv_ltd(g, x_min, x_max, p_max, a):
    b = _b(x_min, x_max, p_max, a)
    with np.errstate(divide="ignore"):
        return np.clip(p_max + a * np.log1p(-(x_max - g) / b), 0.0, p_max)


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def conductance_ltp(pulses, model: PulseUpdateModel):
    """Potentiation curve X = B (1 - exp(-P/a)) + x_min."""
    p = _check_pulses(pulses, model.p_max)
    return _scalar(_ltp(p, model.x_min, model.x_max, model.p_max, model.a))


def conductance_ltd(pulses, model: PulseUpdateModel):
    """Depression curve X = -B (1 - exp((P - p_max)/a)) + x_max."""
    p = _check_pulses(pulses, model.p_max)
    return _scalar(_ltd(p, model.x_min, model.x_max, model.p_max, model.a))


def pulses_ltp(g, model: PulseUpdateModel):
    """Inverse of ``conductance_ltp`` (clipped to [0, p_max])."""
    return _scalar(_inv_ltp(np.asarray(g, float), model.x_min, model.x_max, model.p_max, model.a))


def pulses_ltd(g, model: PulseUpdateModel):
    return _scalar(_inv_ltd(np.asarray(g, float), model.x_min, model.x_max, model.p_max, model.a))


# --------------------------------------------------------------------------
# Devices
# --------------------------------------------------------------------------


@dataclass
class DeviceArray:
    """A grid of devices sharing ``p_max`` but with per-device curve parameters.

    ``pulse_pos`` is the position on each device's own potentiation curve,
    so the conductance is always ``X_ltp(pulse_pos)``.
    """

    pulse_pos: np.ndarray
    x_min: np.ndarray
    x_max: np.ndarray
    a: np.ndarray
    p_max: float
    nominal: PulseUpdateModel

    @classmethod
    def uniform(cls, shape, model: PulseUpdateModel, pulse_pos=None):
        pos = np.zeros(shape) if pulse_pos is None else np.asarray(pulse_pos, float).copy()
        return cls(
            pos,
            np.full(shape, model.x_min),
            np.full(shape, model.x_max),
            np.full(shape, float(model.a)),
            float(model.p_max),
            model,
        )

    @property
    def g(self) -> np.ndarray:
        return _ltp(self.pulse_pos, self.x_min, self.x_max, self.p_max, self.a)

    def copy(self) -> "DeviceArray":
        return DeviceArray(self.pulse_pos.copy(), self.x_min.copy(), self.x_max.copy(),
                           self.a.copy(), self.p_max, self.nominal)

    def set_conductance(self, g):
        g = np.clip(g, self.x_min, self.x_max)
        self.pulse_pos = _inv_ltp(g, self.x_min, self.x_max, self.p_max, self.a)

    def program(self, delta_g) -> np.ndarray:
        """Apply a requested conductance change to every device in place.

        The programming controller only knows the nominal curves: it turns
        ``delta_g`` into a pulse count using the nominal slope at the
        device's present conductance.  The device then moves that many
        pulses along its own LTP (delta_g > 0) or LTD (delta_g < 0) curve,
        saturating at the ends.  Returns the realized change.
        """
        delta_g = np.asarray(delta_g, dtype=float)
        g = self.g
        nom = self.nominal
        b_nom = scale_factor_b(nom)
        g_nom = np.clip(g, nom.x_min, nom.x_max)
        slope_up = (b_nom + nom.x_min - g_nom) / nom.a
        slope_down = (b_nom - nom.x_max + g_nom) / nom.a
        up = delta_g > 0
        down = delta_g < 0
        with np.errstate(divide="ignore", invalid="ignore"):
            n_pulses = np.where(up, delta_g / slope_up, np.where(down, -delta_g / slope_down, 0.0))
        n_pulses = np.nan_to_num(n_pulses, nan=0.0, posinf=self.p_max, neginf=0.0)
        n_pulses = np.clip(n_pulses, 0.0, self.p_max)

        new_pos = self.pulse_pos
        if np.any(up):
            new_pos = np.where(up, np.clip(self.pulse_pos + n_pulses, 0.0, self.p_max), new_pos)
        if np.any(down):
            ltd_pos = _inv_ltd(g, self.x_min, self.x_max, self.p_max, self.a)
            ltd_pos = np.clip(ltd_pos - n_pulses, 0.0, self.p_max)
            g_down = _ltd(ltd_pos, self.x_min, self.x_max, self.p_max, self.a)
            pos_down = _inv_ltp(g_down, self.x_min, self.x_max, self.p_max, self.a)
            new_pos = np.where(down, pos_down, new_pos)
        self.pulse_pos = np.asarray(new_pos, dtype=float)
        return self.g - g


@dataclass(frozen=True)
class CrossbarDevice:
    g: float
    pulse_pos: float
    model: PulseUpdateModel

    @classmethod
    def at_pulse(cls, pulse_pos: float, model: PulseUpdateModel) -> "CrossbarDevice":
        return cls(conductance_ltp(pulse_pos, model), float(pulse_pos), model)


def program_weight_update(device: CrossbarDevice, delta_g: float,
                          nominal: PulseUpdateModel | None = None) -> CrossbarDevice:
    """Single-device version of :meth:`DeviceArray.program`."""
    m = device.model
    arr = DeviceArray(np.array([device.pulse_pos]), np.array([m.x_min]), np.array([m.x_max]),
                      np.array([float(m.a)]), float(m.p_max), nominal or m)
    if delta_g == 0:
        return device
    arr.program(np.array([delta_g]))
    return CrossbarDevice(float(arr.g[0]), float(arr.pulse_pos[0]), m)


@dataclass
class Crossbar:
    """Differential-pair crossbar with ``rows`` inputs and ``cols`` outputs."""

    pos: DeviceArray
    neg: DeviceArray
    weight_scale: float = 1.0

    @property
    def shape(self):
        return self.pos.pulse_pos.shape

    @property
    def conductance_weights(self) -> np.ndarray:
        """g_pos - g_neg in Siemens."""
        return self.pos.g - self.neg.g

    @property
    def weights(self) -> np.ndarray:
        return self.weight_scale * self.conductance_weights

    @classmethod
    def from_weights(cls, weights, model: PulseUpdateModel, weight_scale: float = 1.0):
        """Program a pair grid so that ``weight_scale * (g_pos - g_neg) == weights``.

        Both devices sit symmetrically about the middle of the range.
        """
        w = np.asarray(weights, dtype=float)
        diff = w / weight_scale
        span = model.x_max - model.x_min
        if np.any(np.abs(diff) > span * (1 + 1e-12)):
            raise ConfigurationError("requested weights exceed the differential conductance range")
        mid = 0.5 * (model.x_min + model.x_max)
        pos = DeviceArray.uniform(w.shape, model)
        neg = DeviceArray.uniform(w.shape, model)
        pos.set_conductance(mid + diff / 2)
        neg.set_conductance(mid - diff / 2)
        return cls(pos, neg, weight_scale)

    def copy(self) -> "Crossbar":
        return Crossbar(self.pos.copy(), self.neg.copy(), self.weight_scale)

    def program_delta(self, delta_w):
        """Realize a weight change (weight units) by splitting it over the pair."""
        dg = np.asarray(delta_w, dtype=float) / self.weight_scale
        self.pos.program(0.5 * dg)
        self.neg.program(-0.5 * dg)

    def clamp_conductance_weights(self, lo: float, hi: float):
        """Reprogram pairs whose g_pos - g_neg lies outside [lo, hi] (Siemens)."""
        diff = self.conductance_weights
        bad = (diff < lo) | (diff > hi)
        if not np.any(bad):
            return
        target = np.clip(diff, lo, hi)
        g_neg = self.neg.g
        g_pos = np.clip(g_neg + target, self.pos.x_min, self.pos.x_max)
        g_neg_new = np.clip(g_pos - target, self.neg.x_min, self.neg.x_max)
        self.pos.set_conductance(np.where(bad, g_pos, self.pos.g))
        self.neg.set_conductance(np.where(bad, g_neg_new, g_neg))


def vmm(crossbar_or_weights, x) -> np.ndarray:
    """y_k = sum_j x_j W_jk for a crossbar (or a plain weight matrix)."""
    w = crossbar_or_weights.weights if isinstance(crossbar_or_weights, Crossbar) else np.asarray(
        crossbar_or_weights, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != w.shape[0]:
        raise InputError(f"input length {x.shape[-1]} does not match crossbar rows {w.shape[0]}")
    return x @ w


# --------------------------------------------------------------------------
# Two-layer readout
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class NonidealitySpec:
    d2d_sigma: float = 0.0
    region: tuple[float, float] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.d2d_sigma < 0:
            raise ConfigurationError("d2d_sigma must be >= 0")
        if self.region is not None and not self.region[0] < self.region[1]:
            raise ConfigurationError("region must satisfy lo < hi")


REGION_PRESETS = {
    "R1": (-1.30e-5, 0.40e-5),
    "R2": (-1.20e-5, 0.30e-5),
    "R3": (-1.10e-5, 0.30e-5),
}


@dataclass
class ReadoutModel:
    layer1: Crossbar
    layer2: Crossbar
    head: str = "softmax"
    ideal: bool = False
    # float weights used for backprop; in ideal mode they are the model
    shadow: list = field(default_factory=list)
    region: tuple[float, float] | None = None

    def __post_init__(self):
        if self.head not in ("softmax", "linear"):
            raise ConfigurationError("head must be 'softmax' or 'linear'")
        if self.layer1.shape[1] != self.layer2.shape[0]:
            raise ConfigurationError("layer shapes do not chain")
        if not self.shadow:
            self.shadow = [self.layer1.weights.copy(), self.layer2.weights.copy()]

    @property
    def crossbars(self):
        return (self.layer1, self.layer2)

    def weights(self) -> list[np.ndarray]:
        """Weights the hardware computes with (the float copy in ideal mode)."""
        if self.ideal:
            return [w.copy() for w in self.shadow]
        return [self.layer1.weights, self.layer2.weights]

    def weight_bounds(self, layer: int) -> tuple[float, float]:
        """Allowed interval for the float weights of one layer (weight units)."""
        xb = self.crossbars[layer]
        nom = xb.pos.nominal
        span = nom.x_max - nom.x_min
        lo, hi = -span, span
        if self.region is not None:
            lo, hi = max(lo, self.region[0]), min(hi, self.region[1])
        return lo * xb.weight_scale, hi * xb.weight_scale

    def copy(self) -> "ReadoutModel":
        return ReadoutModel(self.layer1.copy(), self.layer2.copy(), self.head, self.ideal,
                            [w.copy() for w in self.shadow], self.region)


def build_readout(n_in: int, n_hidden: int, n_out: int, head: str = "softmax",
                  model: PulseUpdateModel = PulseUpdateModel(), weight_range: float = 2.0,
                  seed: int = 0, ideal: bool = False) -> ReadoutModel:
    """Two differential crossbars with Glorot-uniform initial weights.

    ``weight_range`` is the weight (in dimensionless units) represented by
    the full differential span ``x_max - x_min``.
    """
    rng = np.random.default_rng(seed)
    scale = weight_range / (model.x_max - model.x_min)
    layers = []
    for fan_in, fan_out in ((n_in, n_hidden), (n_hidden, n_out)):
        limit = min(math.sqrt(6.0 / (fan_in + fan_out)), weight_range)
        w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        layers.append(Crossbar.from_weights(w, model, scale))
    return ReadoutModel(layers[0], layers[1], head, ideal)


def relu(x):
    return np.maximum(x, 0.0)


def softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _forward(weights, x, head):
    h_pre = x @ weights[0]
    h = relu(h_pre)
    z = h @ weights[1]
    out = softmax(z) if head == "softmax" else z
    return out, (x, h_pre, h, z)


def forward(model: ReadoutModel, x) -> np.ndarray:
    """layer2(ReLU(layer1(x))) followed by softmax or identity."""
    x = np.asarray(x, dtype=float)
    w = model.weights()
    if x.shape[-1] != w[0].shape[0]:
        raise InputError(f"state length {x.shape[-1]} does not match readout input {w[0].shape[0]}")
    return _forward(w, x, model.head)[0]


def _loss(out, targets, head):
    if head == "softmax":
        return float(-np.mean(np.sum(targets * np.log(np.clip(out, 1e-300, None)), axis=1)))
    return float(np.mean(np.sum((out - targets) ** 2, axis=1)))


def loss_and_grads(weights, x, targets, head="softmax"):
    """Mean loss over the batch and its gradients w.r.t. both weight matrices.

    Categorical cross-entropy for the softmax head, mean squared error
    (summed over outputs) for the linear head.
    """
    out, (x, h_pre, h, _) = _forward(weights, x, head)
    n = x.shape[0]
    loss = _loss(out, targets, head)
    dz = (out - targets) / n if head == "softmax" else 2.0 * (out - targets) / n
    g2 = h.T @ dz
    dh = (dz @ weights[1].T) * (h_pre > 0)
    g1 = x.T @ dh
    return loss, [g1, g2]


# --------------------------------------------------------------------------
# Nonidealities
# --------------------------------------------------------------------------


def apply_d2d(model: ReadoutModel, sigma: float, seed: int = 0) -> ReadoutModel:
    """Multiply every device's a, x_min and x_max by independent (1 + eps).

    eps ~ Normal(0, sigma) truncated at +/-3 sigma.  Each device keeps its
    initialized conductance (clipped into its new range); only its future
    response to programming pulses changes.
    """
    if not 0 <= sigma <= 0.5:
        raise ConfigurationError("sigma must lie in [0, 0.5]")
    out = model.copy()
    if sigma == 0:
        return out
    rng = np.random.default_rng(seed)
    for xb in out.crossbars:
        for arr in (xb.pos, xb.neg):
            shape = arr.pulse_pos.shape
            g0 = arr.g
            eps = np.clip(rng.normal(0.0, sigma, size=(3,) + shape), -3 * sigma, 3 * sigma)
            a = arr.a * (1 + eps[0])
            lo = arr.x_min * (1 + eps[1])
            hi = arr.x_max * (1 + eps[2])
            arr.a = a
            arr.x_min = np.minimum(lo, hi)
            arr.x_max = np.maximum(lo, hi)
            arr.x_max = np.where(arr.x_max == arr.x_min, arr.x_min + 1e-12, arr.x_max)
            arr.set_conductance(g0)
    return out


def clip_region(model: ReadoutModel, region) -> ReadoutModel:
    """Constrain effective weights (Siemens) to ``region`` from now on."""
    if isinstance(region, str):
        region = REGION_PRESETS[region]
    lo, hi = float(region[0]), float(region[1])
    if not lo < hi:
        raise ConfigurationError("region must satisfy lo < hi")
    out = model.copy()
    out.region = (lo, hi)
    _enforce_region(out)
    return out


def _enforce_region(model: ReadoutModel):
    for layer in range(2):
        lo, hi = model.weight_bounds(layer)
        np.clip(model.shadow[layer], lo, hi, out=model.shadow[layer])
        if model.region is not None and not model.ideal:
            model.crossbars[layer].clamp_conductance_weights(*model.region)


# --------------------------------------------------------------------------
# Training
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch: int = 32
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0


def evaluate(model: ReadoutModel, x, targets) -> tuple[float, float | None]:
    """(loss, accuracy) with the hardware weights; accuracy is None for regression."""
    out = forward(model, x)
    loss = _loss(out, targets, model.head)
    if model.head != "softmax":
        return loss, None
    return loss, float(np.mean(out.argmax(axis=1) == targets.argmax(axis=1)))


def train(model: ReadoutModel, states, targets, config: TrainConfig = TrainConfig(),
          val_states=None, val_targets=None, callback=None) -> list[dict]:
    """Mini-batch Adam on the float weights, each step programmed into the devices.

    Modifies ``model`` in place and returns one metrics dict per epoch
    (plus an epoch-0 row for the untrained model).
    """
    x = np.asarray(states, dtype=float)
    t = np.asarray(targets, dtype=float)
    if t.ndim == 1:
        t = t[:, None]
    if x.shape[0] != t.shape[0]:
        raise InputError("states and targets differ in length")
    rng = np.random.default_rng(config.seed)
    m = [np.zeros_like(w) for w in model.shadow]
    v = [np.zeros_like(w) for w in model.shadow]
    step = 0
    _enforce_region(model)

    def record(epoch):
        row = {"epoch": epoch}
        row["train_loss"], row["train_acc"] = evaluate(model, x, t)
        if val_states is not None:
            vt = np.asarray(val_targets, dtype=float)
            row["val_loss"], row["val_acc"] = evaluate(model, val_states, vt[:, None] if vt.ndim == 1 else vt)
        if not math.isfinite(row["train_loss"]):
            raise NumericalError(f"non-finite training loss at epoch {epoch}")
        return row

    history = [record(0)]
    n = x.shape[0]
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, config.batch):
            idx = order[start : start + config.batch]
            loss, grads = loss_and_grads(model.shadow, x[idx], t[idx], model.head)
            if not math.isfinite(loss):
                raise NumericalError(f"non-finite loss at epoch {epoch}, step {step}")
            step += 1
            for layer, g in enumerate(grads):
                m[layer] = config.beta1 * m[layer] + (1 - config.beta1) * g
                v[layer] = config.beta2 * v[layer] + (1 - config.beta2) * g * g
                m_hat = m[layer] / (1 - config.beta1**step)
                v_hat = v[layer] / (1 - config.beta2**step)
                old = model.shadow[layer]
                lo, hi = model.weight_bounds(layer)
                new = np.clip(old - config.lr * m_hat / (np.sqrt(v_hat) + config.eps), lo, hi)
                delta = new - old
                model.shadow[layer] = new
                if not model.ideal and np.any(delta):
                    model.crossbars[layer].program_delta(delta)
            if model.region is not None and not model.ideal:
                for xb in model.crossbars:
                    xb.clamp_conductance_weights(*model.region)
        row = record(epoch)
        history.append(row)
        if callback is not None:
            callback(row)
    return history


# --------------------------------------------------------------------------
# Exports
# --------------------------------------------------------------------------


def write_weights_csv(path, crossbar: Crossbar):
    """Grid of effective conductance weights g_pos - g_neg in Siemens (rows = inputs)."""
    w = crossbar.conductance_weights
    header = ["row"] + [f"col{j}" for j in range(w.shape[1])]
    return write_csv(path, header, ([i, *w[i]] for i in range(w.shape[0])))


def write_training_log(path, history: list[dict]):
    cols = ["epoch", "train_loss", "train_acc", "val_loss", "val_acc"]
    rows = ([h.get(c, "") if h.get(c) is not None else "" for c in cols] for h in history)
    return write_csv(path, cols, rows)
