"""Audio ingestion, MFCC front end, dataset utilities and Mackey-Glass generation."""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.fft import dct

from .csvio import write_csv
from .errors import ConfigurationError, DataError, InputError, WavParseError

__all__ = [
    "AudioClip",
    "MfccConfig",
    "MgParams",
    "StandardStats",
    "read_wav",
    "write_wav",
    "resample",
    "mel_filterbank",
    "frame_signal",
    "mfcc",
    "pad_frames",
    "fit_standardizer",
    "standardize",
    "one_hot",
    "split",
    "parse_fsdd_name",
    "load_fsdd_dir",
    "load_mfcc_npz",
    "mackey_glass",
    "delay_embed",
    "write_series_csv",
]


@dataclass
class AudioClip:
    samples: np.ndarray
    sample_rate: float
    label: int | None = None
    speaker: str | None = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if not self.sample_rate > 0:
            raise InputError("sample_rate must be positive")
        if not np.all(np.isfinite(self.samples)):
            raise InputError("audio samples must be finite")


# --------------------------------------------------------------------------
# WAV
# --------------------------------------------------------------------------


def read_wav(path, label=None, speaker=None) -> AudioClip:
    """Parse a RIFF/WAVE file holding 16-bit PCM (mono, or stereo averaged)."""
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise WavParseError("file shorter than RIFF header", 0)
    if data[0:4] != b"RIFF":
        raise WavParseError(f"bad magic {data[0:4]!r}, expected b'RIFF'", 0)
    if data[8:12] != b"WAVE":
        raise WavParseError(f"bad form type {data[8:12]!r}, expected b'WAVE'", 8)

    fmt = None
    pcm = None
    pos = 12
    while pos < len(data):
        if pos + 8 > len(data):
            raise WavParseError("truncated chunk header", pos)
        chunk_id = data[pos : pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = pos + 8
        if body + size > len(data):
            raise WavParseError(f"chunk {chunk_id!r} declares {size} bytes past end of file", pos)
        if chunk_id == b"fmt ":
            if size < 16:
                raise WavParseError("fmt chunk too short", pos)
            tag, channels, rate, _, block_align, bits = struct.unpack_from("<HHIIHH", data, body)
            if tag != 1:
                raise WavParseError(f"unsupported format tag {tag} (only PCM=1)", body)
            if bits != 16:
                raise WavParseError(f"unsupported bit depth {bits} (only 16-bit)", body + 14)
            if channels not in (1, 2):
                raise WavParseError(f"unsupported channel count {channels}", body + 2)
            fmt = (channels, rate, block_align)
        elif chunk_id == b"data":
            if fmt is None:
                raise WavParseError("data chunk before fmt chunk", pos)
            channels = fmt[0]
            usable = size - size % (2 * channels)
            pcm = np.frombuffer(data, dtype="<i2", count=usable // 2, offset=body)
        pos = body + size + (size & 1)
    if fmt is None:
        raise WavParseError("missing fmt chunk", len(data))
    if pcm is None:
        raise WavParseError("missing data chunk", len(data))
    channels, rate, _ = fmt
    samples = pcm.astype(float) / 32768.0
    if channels == 2:
        samples = samples.reshape(-1, 2).mean(axis=1)
    return AudioClip(samples, float(rate), label, speaker)


def write_wav(path, clip: AudioClip) -> Path:
    pcm = np.clip(np.round(clip.samples * 32768.0), -32768, 32767).astype("<i2")
    rate = int(round(clip.sample_rate))
    payload = pcm.tobytes()
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    header += b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, rate, rate * 2, 2, 16)
    header += b"data" + struct.pack("<I", len(payload))
    path = Path(path)
    path.write_bytes(header + payload)
    return path


def resample(clip: AudioClip, target_rate: float) -> AudioClip:
    """Linear-interpolation resampling to ``target_rate``."""
    if not target_rate > 0:
        raise InputError("target_rate must be positive")
    if target_rate == clip.sample_rate:
        return AudioClip(clip.samples.copy(), clip.sample_rate, clip.label, clip.speaker)
    n_in = len(clip.samples)
    n_out = int(round(n_in * target_rate / clip.sample_rate))
    t_out = np.arange(n_out) / target_rate
    t_in = np.arange(n_in) / clip.sample_rate
    out = np.interp(t_out, t_in, clip.samples) if n_in else np.zeros(n_out)
    return AudioClip(out, float(target_rate), clip.label, clip.speaker)


# --------------------------------------------------------------------------
# MFCC
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MfccConfig:
    sample_rate: float = 8000.0
    frame_len: float = 0.025
    hop: float = 0.010
    n_fft: int = 512
    n_mels: int = 26
    n_coeffs: int = 13
    pre_emphasis: float = 0.97
    max_frames: int = 25
    log_floor: float = 1e-10

    def __post_init__(self):
        if not 0 < self.hop <= self.frame_len:
            raise ConfigurationError("need 0 < hop <= frame_len")
        if not 1 <= self.n_coeffs <= self.n_mels:
            raise ConfigurationError("need 1 <= n_coeffs <= n_mels")
        if self.max_frames < 1:
            raise ConfigurationError("max_frames must be >= 1")
        if self.n_fft < int(round(self.frame_len * self.sample_rate)):
            raise ConfigurationError("n_fft shorter than a frame")

    @property
    def feature_length(self) -> int:
        return self.max_frames * self.n_coeffs


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=float) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=float) / 2595.0) - 1.0)


def mel_filterbank(n_mels: int, n_fft: int, sample_rate: float) -> np.ndarray:
    """Triangular filters on the HTK mel scale, shape (n_mels, n_fft//2 + 1)."""
    n_bins = n_fft // 2 + 1
    freqs = np.linspace(0.0, sample_rate / 2.0, n_bins)
    edges = _mel_to_hz(np.linspace(0.0, _hz_to_mel(sample_rate / 2.0), n_mels + 2))
    bank = np.zeros((n_mels, n_bins))
    for m in range(n_mels):
        lo, mid, hi = edges[m], edges[m + 1], edges[m + 2]
        rising = (freqs - lo) / (mid - lo)
        falling = (hi - freqs) / (hi - mid)
        bank[m] = np.maximum(0.0, np.minimum(rising, falling))
    return bank


def frame_signal(x: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    if len(x) < frame_len:
        x = np.concatenate([x, np.zeros(frame_len - len(x))])
    n_frames = 1 + (len(x) - frame_len) // hop
    idx = np.arange(frame_len)[None, :] + hop * np.arange(n_frames)[:, None]
    return x[idx]


def mel_energies(clip: AudioClip, config: MfccConfig = MfccConfig()) -> np.ndarray:
    """Per-frame mel filterbank energies (before the log), shape (frames, n_mels)."""
    x = clip.samples
    if clip.sample_rate != config.sample_rate:
        x = resample(clip, config.sample_rate).samples
    if len(x):
        x = np.append(x[0], x[1:] - config.pre_emphasis * x[:-1])
    frame_len = int(round(config.frame_len * config.sample_rate))
    hop = int(round(config.hop * config.sample_rate))
    frames = frame_signal(x, frame_len, hop) * np.hanning(frame_len + 2)[1:-1]
    power = np.abs(np.fft.rfft(frames, n=config.n_fft, axis=1)) ** 2 / config.n_fft
    return power @ mel_filterbank(config.n_mels, config.n_fft, config.sample_rate).T


def mfcc(clip: AudioClip, config: MfccConfig = MfccConfig(), pad: bool = True) -> np.ndarray:
    """MFCC matrix of shape (frames, n_coeffs).

    Pre-emphasis, Hann-windowed frames, power spectrum, mel filterbank,
    log (floored), orthonormal DCT-II.  With ``pad`` the frame axis is
    zero-padded or truncated to ``config.max_frames``.
    """
    energies = mel_energies(clip, config)
    logmel = np.log(np.maximum(energies, config.log_floor))
    coeffs = dct(logmel, type=2, norm="ortho", axis=1)[:, : config.n_coeffs]
    return pad_frames(coeffs, config.max_frames) if pad else coeffs


def pad_frames(frames: np.ndarray, max_frames: int) -> np.ndarray:
    frames = np.asarray(frames, dtype=float)[:max_frames]
    if len(frames) < max_frames:
        frames = np.vstack([frames, np.zeros((max_frames - len(frames), frames.shape[1]))])
    return frames


# --------------------------------------------------------------------------
# Dataset utilities
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class StandardStats:
    mean: np.ndarray
    std: np.ndarray
    provenance: str = "train"


def fit_standardizer(features, provenance: str = "train") -> StandardStats:
    x = np.asarray(features, dtype=float)
    return StandardStats(x.mean(axis=0), x.std(axis=0), provenance)


def standardize(features, stats: StandardStats | None = None) -> np.ndarray:
    """Per-feature z-score; zero-variance features map to 0."""
    x = np.asarray(features, dtype=float)
    if stats is None:
        stats = fit_standardizer(x)
    std = np.where(stats.std > 0, stats.std, 1.0)
    out = (x - stats.mean) / std
    out[..., stats.std == 0] = 0.0
    return out


def one_hot(label, n_classes: int) -> np.ndarray:
    labels = np.atleast_1d(np.asarray(label))
    if labels.dtype.kind not in "iu" or np.any(labels < 0) or np.any(labels >= n_classes):
        raise InputError(f"labels must be integers in [0, {n_classes})")
    out = np.zeros((labels.size, n_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out[0] if np.ndim(label) == 0 else out


def split(n_samples: int, train_fraction: float = 0.75, seed: int = 0):
    """Seeded shuffle then partition; returns (train_idx, test_idx)."""
    if not 0 < train_fraction < 1:
        raise ConfigurationError("train_fraction must lie in (0, 1)")
    n_train = int(round(n_samples * train_fraction))
    if n_train == 0 or n_train == n_samples:
        raise ConfigurationError(f"split of {n_samples} samples at {train_fraction} leaves a side empty")
    order = np.random.default_rng(seed).permutation(n_samples)
    return np.sort(order[:n_train]), np.sort(order[n_train:])


_FSDD_NAME = re.compile(r"^(\d)_([A-Za-z0-9-]+)_(\d+)\.wav$")


def parse_fsdd_name(name: str):
    m = _FSDD_NAME.match(Path(name).name)
    if not m:
        return None
    return int(m.group(1)), m.group(2), int(m.group(3))


def load_fsdd_dir(directory) -> list[AudioClip]:
    """Load every ``{digit}_{speaker}_{index}.wav`` under ``directory``, sorted by name."""
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(
            f"FSDD directory {str(directory)!r} not found; expected a folder of "
            "'{digit}_{speaker}_{index}.wav' files (e.g. free-spoken-digit-dataset/recordings)"
        )
    clips = []
    for path in sorted(directory.rglob("*.wav")):
        parsed = parse_fsdd_name(path.name)
        if parsed is None:
            continue
        clips.append(read_wav(path, label=parsed[0], speaker=parsed[1]))
    if not clips:
        raise DataError(f"no '{{digit}}_{{speaker}}_{{index}}.wav' files under {str(directory)!r}")
    return clips


def load_mfcc_npz(path):
    """Pre-extracted MFCC sequences stored as concatenated frames.

    Expects arrays ``X`` (total_frames, n_coeffs), ``y`` (n,) and
    ``lengths`` (n,).  Returns (list of per-utterance frame matrices, labels).
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"MFCC archive {str(path)!r} not found")
    with np.load(path) as data:
        try:
            x, y, lengths = data["X"], data["y"], data["lengths"]
        except KeyError as exc:
            raise DataError(f"{path}: missing array {exc}") from None
    if int(lengths.sum()) != len(x) or len(lengths) != len(y):
        raise DataError(f"{path}: lengths do not match the frame array")
    bounds = np.concatenate([[0], np.cumsum(lengths)])
    seqs = [np.asarray(x[a:b], dtype=float) for a, b in zip(bounds[:-1], bounds[1:])]
    return seqs, np.asarray(y, dtype=int)


# --------------------------------------------------------------------------
# Mackey-Glass
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MgParams:
    beta: float = 0.2
    gamma: float = 0.1
    n: float = 10.0
    tau: float = 17.0
    x0: float = 1.2
    dt: float = 0.1
    n_steps: int = 30000
    washout: int = 500

    def __post_init__(self):
        if not (self.beta >= 0 and self.gamma > 0 and self.dt > 0):
            raise ConfigurationError("need beta >= 0, gamma > 0, dt > 0")
        if self.tau < 0:
            raise ConfigurationError("tau must be >= 0")
        m = self.tau / self.dt
        if abs(m - round(m)) > 1e-9 * max(1.0, m):
            raise ConfigurationError(f"dt={self.dt} must divide tau={self.tau}")
        if not 0 <= self.washout <= self.n_steps:
            raise ConfigurationError("washout must lie in [0, n_steps]")


def mackey_glass(params: MgParams = MgParams()) -> np.ndarray:
    """Integrate dx/dt = beta x(t-tau)/(1 + x(t-tau)^n) - gamma x(t).

    RK4 on the dt grid; delayed values at half steps come from cubic
    Hermite interpolation of the stored history.  History before t=0 is the
    constant x0.  Returns x at grid points ``washout .. n_steps``.
    """
    beta, gamma, n, dt = params.beta, params.gamma, params.n, params.dt
    lag = int(round(params.tau / params.dt))
    total = params.n_steps
    x = np.empty(total + 1)
    dx = np.empty(total + 1)
    x[0] = params.x0

    def feedback(xd):
        return beta * xd / (1.0 + xd**n)

    def delayed(k):
        # value and slope of x at grid index k (k < 0 is the constant history)
        return (x[k], dx[k]) if k >= 0 else (params.x0, 0.0)

    if lag == 0:
        f = lambda y: feedback(y) - gamma * y
        for k in range(total):
            y = x[k]
            k1 = f(y)
            k2 = f(y + 0.5 * dt * k1)
            k3 = f(y + 0.5 * dt * k2)
            k4 = f(y + dt * k3)
            x[k + 1] = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        return x[params.washout :].copy()

    for k in range(total):
        xa, fa = delayed(k - lag)
        y = x[k]
        k1 = feedback(xa) - gamma * y
        dx[k] = k1
        xb, fb = delayed(k - lag + 1)
        xm = 0.5 * (xa + xb) + dt / 8.0 * (fa - fb)
        k2 = feedback(xm) - gamma * (y + 0.5 * dt * k1)
        k3 = feedback(xm) - gamma * (y + 0.5 * dt * k2)
        k4 = feedback(xb) - gamma * (y + dt * k3)
        x[k + 1] = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return x[params.washout :].copy()


def delay_embed(series, lag: int) -> np.ndarray:
    """Pairs (x[t - lag], x[t]) for t = lag .. len-1, shape (len - lag, 2)."""
    x = np.asarray(series, dtype=float)
    if not 0 <= lag < len(x):
        raise InputError("lag must lie in [0, len(series))")
    return np.column_stack([x[: len(x) - lag], x[lag:]])


def write_series_csv(path, series, dt: float, t0: float = 0.0):
    series = np.asarray(series, dtype=float)
    t = t0 + dt * np.arange(len(series))
    return write_csv(path, ["t", "x"], zip(t, series))
