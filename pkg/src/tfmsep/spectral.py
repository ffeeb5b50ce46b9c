"""Hann-windowed STFT, weighted overlap-add inverse, and log-magnitude features."""
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import _backend
from .audio import AudioSignal
from .errors import (
    DegenerateFeaturesError,
    DegenerateParamsError,
    LengthError,
    ParameterError,
    ShapeError,
)

LOG_EPSILON = 1e-10
# frames per FFT batch; bounds temporary memory at hop 1 on long signals
BLOCK_FRAMES = 1 << 15


@dataclass(frozen=True)
class StftParams:
    window_len: int = 128
    hop: int = 1
    fft_len: int = 128

    def __post_init__(self):
        if not 0 < self.hop <= self.window_len <= self.fft_len:
            raise ParameterError(
                f"need 0 < hop <= window_len <= fft_len, got hop={self.hop}, "
                f"window_len={self.window_len}, fft_len={self.fft_len}")
        if self.window_len < 2:
            raise ParameterError("window_len must be at least 2")
        if self.fft_len % 2:
            raise ParameterError(f"fft_len must be even, got {self.fft_len}")

    @property
    def bins(self):
        return self.fft_len // 2 + 1

    def n_frames(self, n_samples):
        if n_samples < self.window_len:
            return 0
        return (n_samples - self.window_len) // self.hop + 1


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """Complex ``bins x frames`` STFT of a signal of ``origin_len`` samples."""

    data: np.ndarray
    params: StftParams
    origin_len: int
    sample_rate_hz: int = 44100

    def __post_init__(self):
        bins, frames = self.data.shape
        if bins != self.params.bins or frames != self.params.n_frames(self.origin_len):
            raise ShapeError(
                f"spectrogram shape {self.data.shape} inconsistent with params "
                f"{self.params} and origin_len {self.origin_len}")

    @property
    def shape(self):
        return self.data.shape

    def magnitude(self):
        return np.abs(self.data)

    def with_data(self, data):
        return Spectrogram(data, self.params, self.origin_len, self.sample_rate_hz)


@dataclass(frozen=True)
class FeatureStats:
    mean: float
    std: float
    epsilon: float = LOG_EPSILON


def hann_window(length):
    """Symmetric Hann window, ``0.5 * (1 - cos(2 pi n / (length - 1)))``.

    Both endpoints are exactly zero.
    """
    if length < 2:
        raise ParameterError(f"window length must be >= 2, got {length}")
    n = np.arange(length)
    w = 0.5 * (1.0 - np.cos(2.0 * np.pi * n / (length - 1)))
    # mirror the first half so the window is exactly symmetric
    half = (length + 1) // 2
    w[length - half:] = w[:half][::-1]
    return w


def stft(sig, params=StftParams()):
    x = sig.samples if isinstance(sig, AudioSignal) else np.asarray(sig, dtype=np.float64)
    rate = sig.sample_rate_hz if isinstance(sig, AudioSignal) else 44100
    if x.shape[0] < params.window_len:
        raise LengthError(f"signal of {x.shape[0]} samples is shorter than the "
                          f"{params.window_len}-sample window")
    window = hann_window(params.window_len)
    frames = sliding_window_view(x, params.window_len)[::params.hop]
    n_frames = frames.shape[0]
    data = np.empty((params.bins, n_frames), dtype=np.complex128)
    for start in range(0, n_frames, BLOCK_FRAMES):
        block = frames[start:start + BLOCK_FRAMES]
        data[:, start:start + block.shape[0]] = np.fft.rfft(
            block * window, n=params.fft_len, axis=1).T
    return Spectrogram(data, params, x.shape[0], rate)


def istft(spec):
    """Weighted overlap-add inverse of :func:`stft`.

    Every frame is inverse transformed, windowed again, summed, and divided by
    the summed squared window. The first and last covered samples only see the
    zero endpoints of the window and are returned as 0; samples after the last
    frame are not covered and are also 0.
    """
    p = spec.params
    n_frames = spec.data.shape[1]
    window = hann_window(p.window_len)
    num = np.zeros(spec.origin_len)
    for start in range(0, n_frames, BLOCK_FRAMES):
        block = spec.data[:, start:start + BLOCK_FRAMES].T
        frames = np.fft.irfft(block, n=p.fft_len, axis=1)[:, :p.window_len] * window
        _backend.overlap_add(num, np.ascontiguousarray(frames), p.hop, start * p.hop)
    env = _backend.window_envelope(window ** 2, p.hop, n_frames, spec.origin_len)

    out = np.zeros(spec.origin_len)
    if n_frames == 0:
        return AudioSignal(out, spec.sample_rate_hz)
    last = (n_frames - 1) * p.hop + p.window_len - 1
    interior = env[1:last]
    if np.any(interior <= 0.0):
        bad = int(np.flatnonzero(interior <= 0.0)[0]) + 1
        raise DegenerateParamsError(
            f"zero window weight at sample {bad}; hop {p.hop} leaves gaps for a "
            f"{p.window_len}-sample Hann window")
    covered = env > 0.0
    out[covered] = num[covered] / env[covered]
    return AudioSignal(out, spec.sample_rate_hz)


def log_features(mag, stats=None, epsilon=LOG_EPSILON):
    """Natural log of ``mag + epsilon`` standardized by a single global mean/std.

    Without ``stats`` the moments are computed from ``mag`` (training path);
    with ``stats`` they are reused (validation and inference).
    """
    mag = np.asarray(mag, dtype=np.float64)
    if np.any(mag < 0):
        raise ParameterError("magnitudes must be non-negative")
    if stats is not None:
        epsilon = stats.epsilon
    feats = np.log(mag + epsilon)
    if stats is None:
        mean = float(np.mean(feats))
        std = float(np.std(feats))
        if not std > 1e-12 * max(1.0, abs(mean)):
            raise DegenerateFeaturesError("log features are constant; cannot standardize")
        stats = FeatureStats(mean, std, epsilon)
    return (feats - stats.mean) / stats.std, stats


def dump_csv(path, matrix):
    """Write a real ``bins x frames`` matrix as CSV (rows = bins ascending)."""
    np.savetxt(path, np.asarray(matrix, dtype=np.float64), delimiter=",", fmt="%.10g")
