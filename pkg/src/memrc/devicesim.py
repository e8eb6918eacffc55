"""Behavioral models of the two memristor types.

* TiOx non-volatile memristor (NVM): threshold drift model with a
  polynomial window, used for the readout synapses.
* WOx dynamic memristor (DM): volatile state with diffusion decay, used
  as the reservoir node.

All integration is fixed-step RK4 followed by a hard clamp of the state.
Functions are pure; the array helpers (``dm_rate``, ``dm_rk4``) accept
numpy arrays so that many independent devices can be advanced at once.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .csvio import write_csv
from .errors import ConfigurationError, DomainError, InputError, ReadDisturbError

__all__ = [
    "NvmParams",
    "NvmState",
    "DmParams",
    "DmState",
    "PulseSpec",
    "DEFAULT_DM_PULSE",
    "nvm_window",
    "nvm_resistance",
    "nvm_conductance",
    "nvm_rate",
    "nvm_step",
    "nvm_pulse_response",
    "nvm_iv_trace",
    "dm_current",
    "dm_rate",
    "dm_rk4",
    "dm_step",
    "dm_pulse_stream_state",
    "dm_sixteen_states",
    "integrate_rk4",
    "write_pulse_response_csv",
    "write_transient_csv",
]


def _check_finite(**values):
    for name, value in values.items():
        if not np.all(np.isfinite(value)):
            raise InputError(f"{name} must be finite, got {value!r}")


# --------------------------------------------------------------------------
# Parameter and state types
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class NvmParams:
    """TiOx NVM constants plus the read-law resistances.

    ``drift_scale`` multiplies the drift prefactor ``mu_v * r_on / d``.  With
    the nominal constants and ``d`` in nm the raw prefactor is ~1e-14 nm/s,
    which leaves the state frozen on any laboratory time scale; the default
    scale puts a 100 ms, 2.5 V pulse train on the gradual regime of the
    measured pulse response.  Set it to 1.0 for the unscaled model.
    """

    mu_v: float = 10e-17
    r_on: float = 1e3
    r_off: float = 100e3
    d: float = 10.0
    i_on: float = 20e-6
    i_off: float = 22e-6
    i_0: float = 1e-6
    p: int = 10
    v_t_plus: float = 1.0
    v_t_minus: float = -1.0
    drift_scale: float = 1e14

    def __post_init__(self):
        if not self.d > 0:
            raise ConfigurationError("d must be positive")
        if int(self.p) != self.p or self.p < 1:
            raise ConfigurationError("p must be a positive integer")
        if not (self.v_t_minus < 0 < self.v_t_plus):
            raise ConfigurationError("thresholds must satisfy v_t_minus < 0 < v_t_plus")
        if not (0 < self.r_on < self.r_off):
            raise ConfigurationError("need 0 < r_on < r_off")
        if not self.drift_scale > 0:
            raise ConfigurationError("drift_scale must be positive")


@dataclass(frozen=True)
class NvmState:
    w: float  # nm, in [0, d]


@dataclass(frozen=True)
class DmParams:
    """WOx DM constants.  ``lam`` is the lambda of the state equation."""

    alpha: float = 2.5e-6
    beta: float = 0.5
    gamma: float = 2.5e-6
    delta: float = 4.0
    lam: float = 2.5
    eta: float = 2.0
    tau: float = 0.05

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "delta", "lam", "eta", "tau"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"DmParams.{name} must be strictly positive")


@dataclass(frozen=True)
class DmState:
    w: float = 0.0  # dimensionless, in [0, 1]


@dataclass(frozen=True)
class PulseSpec:
    amplitude: float
    width: float
    count: int = 1
    inter_pulse_gap: float = 0.0

    def __post_init__(self):
        _check_finite(amplitude=self.amplitude, width=self.width, gap=self.inter_pulse_gap)
        if not self.width > 0:
            raise ConfigurationError("pulse width must be positive")
        if int(self.count) != self.count or self.count < 1:
            raise ConfigurationError("pulse count must be a positive integer")
        if self.inter_pulse_gap < 0:
            raise ConfigurationError("inter-pulse gap must be >= 0")


# 10 ms set pulses at 1.8 V separated by 25 ms of rest: one slot decays the
# state by ~exp(-0.7) ~ 1/2, which spaces the 16 stream states almost binarily.
DEFAULT_DM_PULSE = PulseSpec(amplitude=1.8, width=0.01, count=1, inter_pulse_gap=0.025)


# --------------------------------------------------------------------------
# Generic fixed-step integrator
# --------------------------------------------------------------------------


def _n_steps(duration, dt):
    n = int(round(duration / dt))
    if abs(n * dt - duration) > 1e-9 * max(duration, dt):
        raise ConfigurationError(f"dt={dt!r} does not divide segment duration {duration!r}")
    return n


def integrate_rk4(
    derivative: Callable,
    y0,
    drive: Sequence[tuple[float, object]],
    dt: float,
    t_end: float | None = None,
    clamp: Callable | None = None,
):
    """Classical RK4 over a piecewise-constant drive.

    ``drive`` is a sequence of ``(duration, u)`` segments and
    ``derivative(y, u)`` returns dy/dt.  If ``t_end`` exceeds the total
    drive duration the last value is held; if shorter, integration stops
    there (it must fall on a step boundary).  ``clamp`` is applied after
    every step.

    Returns ``(y_final, trace)`` where ``trace`` lists ``(t, y)`` at t=0 and
    at every segment boundary reached.
    """
    if not dt > 0:
        raise ConfigurationError("dt must be positive")
    segments = [(float(d), u) for d, u in drive]
    for d, _ in segments:
        if d < 0:
            raise ConfigurationError("segment durations must be >= 0")
    total = sum(d for d, _ in segments)
    if t_end is None:
        t_end = total
    if t_end < 0:
        raise ConfigurationError("t_end must be >= 0")
    if t_end > total:
        hold = segments[-1][1] if segments else 0.0
        segments.append((t_end - total, hold))
    else:
        kept, acc = [], 0.0
        for d, u in segments:
            if acc >= t_end:
                break
            kept.append((min(d, t_end - acc), u))
            acc += d
        segments = kept

    y = np.array(y0, dtype=float) if np.ndim(y0) else float(y0)
    t = 0.0
    trace = [(0.0, y)]
    for duration, u in segments:
        n = _n_steps(duration, dt) if duration > 0 else 0
        for _ in range(n):
            k1 = derivative(y, u)
            k2 = derivative(y + 0.5 * dt * k1, u)
            k3 = derivative(y + 0.5 * dt * k2, u)
            k4 = derivative(y + dt * k3, u)
            y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if clamp is not None:
                y = clamp(y)
        t += n * dt
        trace.append((t, y))
    return y, trace


# --------------------------------------------------------------------------
# TiOx NVM
# --------------------------------------------------------------------------


def nvm_window(w, params: NvmParams):
    """Boundary window f(w) = 1 - (2w/d - 1)^(2p)."""
    w = np.asarray(w, dtype=float)
    if np.any(w < 0) or np.any(w > params.d) or not np.all(np.isfinite(w)):
        raise DomainError(f"w must lie in [0, {params.d}], got {w!r}")
    out = 1.0 - (2.0 * w / params.d - 1.0) ** (2 * int(params.p))
    return float(out) if out.ndim == 0 else out


def nvm_resistance(w, params: NvmParams):
    x = np.asarray(w, dtype=float) / params.d
    out = params.r_on * x + params.r_off * (1.0 - x)
    return float(out) if out.ndim == 0 else out


def nvm_conductance(w, params: NvmParams):
    return 1.0 / nvm_resistance(w, params)


def nvm_rate(w, v, params: NvmParams) -> float:
    """dw/dt in nm/s for a drive voltage ``v``."""
    if params.v_t_minus <= v <= params.v_t_plus:
        return 0.0
    w = min(max(float(w), 0.0), params.d)
    f = 1.0 - (2.0 * w / params.d - 1.0) ** (2 * int(params.p))
    i = v / nvm_resistance(w, params)
    k = params.drift_scale * params.mu_v * params.r_on / params.d
    if v > params.v_t_plus:
        return k * params.i_off / (i - params.i_0) * f
    return k * i / params.i_on * f


def _clamp_nvm(params):
    return lambda w: min(max(w, 0.0), params.d)


def nvm_step(state: NvmState, params: NvmParams, v: float, dt: float) -> NvmState:
    _check_finite(v=v, dt=dt)
    if not dt > 0:
        raise InputError("dt must be positive")
    if params.v_t_minus <= v <= params.v_t_plus:
        return NvmState(state.w)
    w, _ = integrate_rk4(lambda y, u: nvm_rate(y, u, params), state.w, [(dt, v)], dt,
                         clamp=_clamp_nvm(params))
    return NvmState(float(w))


def _pulse_train(pulse: PulseSpec):
    for _ in range(pulse.count):
        yield [(pulse.width, pulse.amplitude), (pulse.inter_pulse_gap, 0.0)]


def nvm_pulse_response(
    params: NvmParams,
    set_pulse: PulseSpec,
    reset_pulse: PulseSpec,
    v_read: float = 0.1,
    w0: float | None = None,
    dt: float | None = None,
) -> list[tuple[int, float]]:
    """Conductance read after every SET then every RESET pulse.

    The device starts at ``w0`` (default 5% of ``d``, a low-conductance
    state) and is read at ``v_read`` after each pulse and its gap.
    """
    if not params.v_t_minus <= v_read <= params.v_t_plus:
        raise ReadDisturbError(
            f"v_read={v_read} lies outside the zero-drift band "
            f"[{params.v_t_minus}, {params.v_t_plus}]"
        )
    w = 0.05 * params.d if w0 is None else float(w0)
    if not 0 <= w <= params.d:
        raise DomainError("w0 outside [0, d]")
    rate = lambda y, u: nvm_rate(y, u, params)
    clamp = _clamp_nvm(params)
    samples = []
    index = 0
    for pulse in (set_pulse, reset_pulse):
        step = pulse.width / 10.0 if dt is None else dt
        for segments in _pulse_train(pulse):
            w, _ = integrate_rk4(rate, w, segments, step, clamp=clamp)
            samples.append((index, nvm_conductance(w, params)))
            index += 1
    return samples


def nvm_iv_trace(
    params: NvmParams,
    v_amplitude: float = 2.5,
    frequency: float = 0.05,
    cycles: int = 1,
    dt: float | None = None,
    w0: float | None = None,
):
    """Sinusoidal drive transient for the I-V hysteresis plot.

    Returns arrays ``(t, v, i, w)``.  Samples are taken every ``dt``
    (default: period/2000).
    """
    _check_finite(v_amplitude=v_amplitude, frequency=frequency)
    if not frequency > 0 or cycles < 1:
        raise ConfigurationError("frequency must be positive and cycles >= 1")
    period = 1.0 / frequency
    if dt is None:
        dt = period / 2000.0
    n = _n_steps(period * cycles, dt)
    w = 0.5 * params.d if w0 is None else float(w0)
    omega = 2.0 * math.pi * frequency
    drive = lambda t: v_amplitude * math.sin(omega * t)
    clamp = _clamp_nvm(params)

    t_out = np.empty(n + 1)
    v_out = np.empty(n + 1)
    w_out = np.empty(n + 1)
    for k in range(n + 1):
        t = k * dt
        t_out[k], v_out[k], w_out[k] = t, drive(t), w
        if k == n:
            break
        k1 = nvm_rate(w, drive(t), params)
        k2 = nvm_rate(w + 0.5 * dt * k1, drive(t + 0.5 * dt), params)
        k3 = nvm_rate(w + 0.5 * dt * k2, drive(t + 0.5 * dt), params)
        k4 = nvm_rate(w + dt * k3, drive(t + dt), params)
        w = clamp(w + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4))
    # sin(2*pi*k/N) is not exactly 0 in floating point at half periods
    v_out[np.isclose(v_out, 0.0, rtol=0.0, atol=1e-12 * abs(v_amplitude))] = 0.0
    i_out = v_out / nvm_resistance(w_out, params)
    return t_out, v_out, i_out, w_out


# --------------------------------------------------------------------------
# WOx DM
# --------------------------------------------------------------------------


def dm_current(state, params: DmParams, v):
    """Read current I = (1-w)*alpha*(1-exp(-beta v)) + w*gamma*sinh(delta v).

    ``state`` may be a DmState, a float or an array of states.
    """
    w = state.w if isinstance(state, DmState) else state
    w = np.asarray(w, dtype=float)
    v = np.asarray(v, dtype=float)
    out = (1.0 - w) * params.alpha * (1.0 - np.exp(-params.beta * v)) + w * params.gamma * np.sinh(
        params.delta * v
    )
    return float(out) if out.ndim == 0 else out


def dm_rate(w, v, params: DmParams):
    return params.lam * np.sinh(params.eta * v) - w / params.tau


def dm_rk4(w, v, dt: float, params: DmParams, n_steps: int = 1):
    """Advance state array ``w`` by ``n_steps`` RK4 steps at constant drive ``v``.

    Works elementwise on broadcastable arrays; the state is clamped to
    [0, 1] after every step.
    """
    drive = params.lam * np.sinh(params.eta * np.asarray(v, dtype=float))
    inv_tau = 1.0 / params.tau
    for _ in range(n_steps):
        k1 = drive - w * inv_tau
        k2 = drive - (w + 0.5 * dt * k1) * inv_tau
        k3 = drive - (w + 0.5 * dt * k2) * inv_tau
        k4 = drive - (w + dt * k3) * inv_tau
        w = np.clip(w + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), 0.0, 1.0)
    return w


def dm_step(state: DmState, params: DmParams, v: float, dt: float) -> DmState:
    _check_finite(w=state.w, v=v, dt=dt)
    if not dt > 0:
        raise InputError("dt must be positive")
    return DmState(float(dm_rk4(float(state.w), v, dt, params)))


def _parse_bits(bits) -> list[int]:
    if isinstance(bits, str):
        seq = [int(c) for c in bits if c in "01"]
        if len(seq) != len(bits):
            raise ConfigurationError(f"bit pattern must contain only 0/1: {bits!r}")
    else:
        seq = [int(b) for b in bits]
    if any(b not in (0, 1) for b in seq) or not seq:
        raise ConfigurationError(f"invalid bit pattern {bits!r}")
    return seq


def dm_pulse_stream_state(
    params: DmParams,
    bits,
    pulse: PulseSpec = DEFAULT_DM_PULSE,
    v_read: float = 0.5,
    w0: float = 0.0,
    dt: float | None = None,
    return_state: bool = False,
):
    """Read current after a stream of set pulses ('1') and rest slots ('0').

    Each slot lasts ``pulse.width`` at either the pulse amplitude or 0 V,
    followed by ``pulse.inter_pulse_gap`` at 0 V.
    """
    seq = _parse_bits(bits)
    step = pulse.width / 10.0 if dt is None else dt
    drive = []
    for b in seq:
        drive.append((pulse.width, pulse.amplitude if b else 0.0))
        if pulse.inter_pulse_gap > 0:
            drive.append((pulse.inter_pulse_gap, 0.0))
    w, _ = integrate_rk4(lambda y, u: dm_rate(y, u, params), w0, drive, step,
                         clamp=lambda y: min(max(y, 0.0), 1.0))
    current = dm_current(float(w), params, v_read)
    return (current, float(w)) if return_state else current


def dm_sixteen_states(params: DmParams = DmParams(), pulse: PulseSpec = DEFAULT_DM_PULSE,
                      v_read: float = 0.5, dt: float | None = None) -> list[tuple[str, float]]:
    """All 4-bit stream patterns with their read currents, in binary order."""
    out = []
    for bits in itertools.product("01", repeat=4):
        pattern = "".join(bits)
        out.append((pattern, dm_pulse_stream_state(params, pattern, pulse, v_read, dt=dt)))
    return out


# --------------------------------------------------------------------------
# CSV emitters
# --------------------------------------------------------------------------


def write_pulse_response_csv(path, samples: Iterable[tuple[int, float]]):
    return write_csv(path, ["pulse_index", "conductance_S"], samples)


def write_transient_csv(path, t, v, i, w):
    return write_csv(path, ["t", "v", "i", "w"], zip(t, v, i, w))
