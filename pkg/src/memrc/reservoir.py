"""Mask-multiplexed dynamic-memristor reservoir.

Each of the ``n_channels`` DM devices sees the input through its own
bipolar mask row.  A *step* consists of ``mask_length`` slots, each held
for ``pulse_width`` seconds, and the read current (at ``v_read``) taken
after selected slots forms the virtual nodes of that step.

Two drive conventions are available through ``mask_stage``:

* ``"post_encode"``: inputs are voltages and slot ``j`` applies
  ``gamma_scale * mask[j] * v[j]`` (bipolar pulses).
* ``"pre_encode"`` (default): inputs are normalized features; the masked
  value ``gamma_scale * mask[j] * z[j]`` is mapped from
  ``[-encode_clip, encode_clip]`` into ``[v_min, v_max]``, so every pulse
  is a unipolar SET pulse.  Bipolar drive keeps slamming the state
  against w = 0 and loses most of the input.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .csvio import write_csv
from .devicesim import DmParams, dm_current, dm_rk4
from .errors import ConfigurationError, InputError

__all__ = [
    "MaskMatrix",
    "ReservoirConfig",
    "ReservoirState",
    "make_bipolar_mask",
    "fsdd_config",
    "mg_config",
    "slot_drive",
    "encode_voltages",
    "run_channel",
    "reservoir_states",
    "run_steps",
    "write_state_csv",
]


@dataclass(frozen=True)
class MaskMatrix:
    values: np.ndarray
    seed: int

    @property
    def shape(self):
        return self.values.shape


def make_bipolar_mask(n: int, ml: int, seed: int = 0) -> MaskMatrix:
    if n < 1 or ml < 1:
        raise ConfigurationError("mask dimensions must be >= 1")
    rng = np.random.default_rng(seed)
    values = (2 * rng.integers(0, 2, size=(n, ml)) - 1).astype(np.int8)
    return MaskMatrix(values, seed)


@dataclass(frozen=True)
class ReservoirConfig:
    n_channels: int = 40
    mask_length: int = 325
    v_min: float = 0.0
    v_max: float = 1.8
    pulse_width: float = 1e-5
    virtual_nodes_per_step: int = 1
    gamma_scale: float = 1.0
    dm_params: DmParams = field(default_factory=DmParams)
    seed: int = 0
    v_read: float = 0.5
    substeps: int = 4
    carry_state: bool = False
    mask_stage: str = "pre_encode"
    encode_clip: float = 2.0

    def __post_init__(self):
        if self.mask_stage not in ("pre_encode", "post_encode"):
            raise ConfigurationError("mask_stage must be 'pre_encode' or 'post_encode'")
        if not self.encode_clip > 0:
            raise ConfigurationError("encode_clip must be positive")
        if not self.v_min < self.v_max:
            raise ConfigurationError("need v_min < v_max")
        if self.n_channels < 1 or self.mask_length < 1:
            raise ConfigurationError("n_channels and mask_length must be >= 1")
        if not self.pulse_width > 0:
            raise ConfigurationError("pulse_width must be positive")
        if self.substeps < 1:
            raise ConfigurationError("substeps must be >= 1")
        k = self.virtual_nodes_per_step
        if k < 1 or self.mask_length % k:
            raise ConfigurationError("virtual_nodes_per_step must divide mask_length")

    @property
    def read_slots(self) -> np.ndarray:
        """Slot indices after which a virtual node is read (evenly spaced, last slot included)."""
        stride = self.mask_length // self.virtual_nodes_per_step
        return np.arange(stride - 1, self.mask_length, stride)

    def mask(self) -> MaskMatrix:
        return make_bipolar_mask(self.n_channels, self.mask_length, self.seed)


def fsdd_config(**overrides) -> ReservoirConfig:
    """40 channels, 25 frames x 13 MFCC per mask period, one read per utterance."""
    return replace(ReservoirConfig(), **overrides)


def mg_config(**overrides) -> ReservoirConfig:
    """10 channels, 4 slots per time step, every slot read, state carried."""
    base = ReservoirConfig(n_channels=10, mask_length=4, virtual_nodes_per_step=4,
                           pulse_width=5e-3, carry_state=True, substeps=10)
    return replace(base, **overrides)


@dataclass(frozen=True)
class ReservoirState:
    """Read currents with layout (sample, step, channel, virtual node)."""

    currents: np.ndarray

    @property
    def layout(self) -> tuple[str, ...]:
        return ("sample", "step", "channel", "node")

    def rows(self) -> np.ndarray:
        """One flat state row per sample (step-major, then channel, then node)."""
        return self.currents.reshape(self.currents.shape[0], -1)


def encode_voltages(features, config: ReservoirConfig, bounds=None) -> np.ndarray:
    """Affine map of ``features`` into [v_min, v_max].

    ``bounds=(lo, hi)`` fixes the source range (values outside are clipped);
    otherwise the observed min/max is used.  A degenerate range maps every
    value to ``v_min``.
    """
    x = np.asarray(features, dtype=float)
    if not np.all(np.isfinite(x)):
        raise InputError("features must be finite")
    if bounds is None:
        lo, hi = (float(x.min()), float(x.max())) if x.size else (0.0, 0.0)
    else:
        lo, hi = map(float, bounds)
    if not hi > lo:
        return np.full_like(x, config.v_min)
    u = np.clip((x - lo) / (hi - lo), 0.0, 1.0)
    return config.v_min + u * (config.v_max - config.v_min)


def slot_drive(inputs, mask_column, config: ReservoirConfig) -> np.ndarray:
    """Voltage applied to each channel during one slot.

    ``inputs``: (samples,) values of this slot; ``mask_column``: (channels,).
    Returns (samples, channels).
    """
    masked = config.gamma_scale * np.asarray(inputs, float)[:, None] * np.asarray(mask_column, float)[None, :]
    if config.mask_stage == "post_encode":
        return masked
    c = config.encode_clip
    u = np.clip((masked + c) / (2 * c), 0.0, 1.0)
    return config.v_min + u * (config.v_max - config.v_min)


def _simulate(inputs, mask_values, config: ReservoirConfig, w0=0.0):
    """Core loop, vectorized over samples and channels.

    ``inputs``: (samples, steps, ML); ``mask_values``: (channels, ML).
    Returns currents (samples, steps, channels, nodes) and final states.
    """
    n_samples, n_steps, ml = inputs.shape
    n_channels = mask_values.shape[0]
    params = config.dm_params
    dt = config.pulse_width / config.substeps
    read_slots = set(config.read_slots.tolist())
    read_current_at = lambda w: dm_current(w, params, config.v_read)
    w = np.broadcast_to(np.asarray(w0, dtype=float), (n_samples, n_channels)).copy()
    out = np.empty((n_samples, n_steps, n_channels, len(read_slots)))
    for k in range(n_steps):
        if k and not config.carry_state:
            w[:] = w0
        node = 0
        for j in range(ml):
            drive = slot_drive(inputs[:, k, j], mask_values[:, j], config)
            w = dm_rk4(w, drive, dt, params, config.substeps)
            if j in read_slots:
                out[:, k, :, node] = read_current_at(w)
                node += 1
    return out, w


def run_channel(mask_row, voltages, config: ReservoirConfig, w0: float = 0.0) -> np.ndarray:
    """Virtual-node currents of one DM channel.

    ``voltages`` has shape (steps, ML) (or (ML,) for one step) and holds
    voltages or normalized features according to ``mask_stage``.  Returns an
    array of shape (steps, virtual_nodes_per_step).
    """
    v = np.atleast_2d(np.asarray(voltages, dtype=float))
    mask_row = np.asarray(mask_row)
    if v.shape[1] != mask_row.shape[-1]:
        raise InputError("voltage rows and mask row must have equal length")
    out, _ = _simulate(v[None], mask_row.reshape(1, -1), config, w0)
    return out[0, :, 0, :]


def reservoir_states(voltages, config: ReservoirConfig, mask: MaskMatrix | None = None,
                     chunk: int = 512) -> ReservoirState:
    """Reservoir currents for a batch of samples.

    ``voltages`` is (samples, steps, ML), or (samples, ML) for single-step
    samples.  Samples are processed in fixed chunks; results do not depend
    on the chunk size.
    """
    try:
        v = np.asarray(voltages, dtype=float)
    except ValueError:
        raise InputError("ragged feature rows") from None
    if v.dtype == object:
        raise InputError("ragged feature rows")
    if v.ndim == 2:
        v = v[:, None, :]
    if v.ndim != 3 or v.shape[2] != config.mask_length:
        raise InputError(
            f"expected samples x steps x {config.mask_length} voltages, got shape {v.shape}"
        )
    if mask is None:
        mask = config.mask()
    if mask.shape != (config.n_channels, config.mask_length):
        raise ConfigurationError("mask shape does not match the reservoir configuration")
    parts = [_simulate(v[i : i + chunk], mask.values, config)[0] for i in range(0, len(v), chunk)]
    currents = np.concatenate(parts) if parts else np.empty((0, v.shape[1], config.n_channels,
                                                               config.virtual_nodes_per_step))
    return ReservoirState(currents)


def run_steps(inputs, config: ReservoirConfig, mask: MaskMatrix | None = None, w0=0.0):
    """Like :func:`reservoir_states` for one batch, also returning the final DM states.

    Lets a caller continue a carried-state run step by step (``w0`` may be
    the state returned by a previous call).
    """
    v = np.asarray(inputs, dtype=float)
    if v.ndim != 3 or v.shape[2] != config.mask_length:
        raise InputError(f"expected samples x steps x {config.mask_length} inputs, got shape {v.shape}")
    mask = config.mask() if mask is None else mask
    currents, w = _simulate(v, mask.values, config, w0)
    return ReservoirState(currents), w


def write_state_csv(path, state: ReservoirState, sample_ids=None):
    """Long-format dump ``sample_id,channel,node,current_A`` (node counts across steps)."""
    cur = state.currents
    n_samples, n_steps, n_channels, n_nodes = cur.shape
    ids = range(n_samples) if sample_ids is None else sample_ids

    def rows():
        for s, sid in enumerate(ids):
            for c in range(n_channels):
                for k in range(n_steps):
                    for n in range(n_nodes):
                        yield sid, c, k * n_nodes + n, cur[s, k, c, n]

    return write_csv(path, ["sample_id", "channel", "node", "current_A"], rows())
