"""Mono audio signals: WAV I/O, power normalization, mixing and synthetic sources.

The two synthetic generators stand in for the two machine recordings: a
decaying impulse train (percussive, repeating) and band-limited noise
(steady, uniform).
"""
import math
import struct
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import signal as sps
from scipy.io import wavfile

from .errors import (
    ChannelError,
    DegenerateSignalError,
    FormatError,
    ParameterError,
    RateError,
    ShapeError,
    WriteError,
)

DEFAULT_SAMPLE_RATE = 44100
PCM16_SCALE = 32768.0


class ClippingWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class AudioSignal:
    """Mono float64 samples plus their sample rate in Hz."""

    samples: np.ndarray
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim != 1:
            raise ShapeError(f"expected 1-D samples, got shape {x.shape}")
        if int(self.sample_rate_hz) <= 0:
            raise ParameterError(f"sample rate must be positive, got {self.sample_rate_hz}")
        if not np.all(np.isfinite(x)):
            raise ParameterError("samples must be finite")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration_s(self):
        return len(self) / self.sample_rate_hz

    def rms(self):
        return float(np.sqrt(np.mean(self.samples ** 2))) if len(self) else 0.0


def read_wav(path, channel=None):
    """Read a PCM16 or IEEE float32 WAV file as a mono :class:`AudioSignal`.

    PCM16 codes are divided by 32768. Multichannel files require ``channel``;
    there is no implicit downmix.
    """
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", wavfile.WavFileWarning)
            rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except (ValueError, EOFError, struct.error, wavfile.WavFileWarning) as exc:
        raise FormatError(f"{path}: not a readable WAV file ({exc})") from exc

    if data.dtype == np.int16:
        data = data.astype(np.float64) / PCM16_SCALE
    elif data.dtype == np.float32:
        data = data.astype(np.float64)
    else:
        raise FormatError(f"{path}: unsupported sample encoding {data.dtype}; "
                          "expected PCM16 or float32")

    if data.ndim == 2:
        n_channels = data.shape[1]
        if channel is None:
            raise ChannelError(f"{path}: file has {n_channels} channels; select one "
                               "with a channel index")
        if not 0 <= channel < n_channels:
            raise ChannelError(f"{path}: channel {channel} out of range 0..{n_channels - 1}")
        data = data[:, channel]
    elif channel not in (None, 0):
        raise ChannelError(f"{path}: mono file has no channel {channel}")
    return AudioSignal(np.ascontiguousarray(data), rate)


def write_wav(path, sig, encoding="float32"):
    if encoding == "float32":
        data = sig.samples.astype(np.float32)
    elif encoding == "pcm16":
        scaled = np.round(sig.samples * PCM16_SCALE)
        lo, hi = np.iinfo(np.int16).min, np.iinfo(np.int16).max
        n_clipped = int(np.count_nonzero((scaled < lo) | (scaled > hi)))
        if n_clipped:
            warnings.warn(f"{n_clipped} samples clipped to the PCM16 range", ClippingWarning,
                          stacklevel=2)
        data = np.clip(scaled, lo, hi).astype(np.int16)
    else:
        raise ParameterError(f"unknown encoding {encoding!r}; use 'pcm16' or 'float32'")
    try:
        wavfile.write(path, sig.sample_rate_hz, data)
    except OSError as exc:
        raise WriteError(f"could not write {path}: {exc}") from exc


def normalize_power(sig):
    """Scale ``sig`` to unit RMS."""
    peak = float(np.max(np.abs(sig.samples))) if len(sig) else 0.0
    if peak == 0.0:
        raise DegenerateSignalError("cannot normalize a signal with zero energy")
    # divide by the peak first so tiny or huge inputs neither underflow nor overflow
    y = sig.samples / peak
    rms = math.sqrt(float(np.dot(y, y)) / len(y))
    return AudioSignal(y / rms, sig.sample_rate_hz)


def mix(a, b, w_a=1.0, w_b=1.0, truncate=False):
    if a.sample_rate_hz != b.sample_rate_hz:
        raise RateError(f"sample rates differ: {a.sample_rate_hz} vs {b.sample_rate_hz}")
    xa, xb = a.samples, b.samples
    if len(xa) != len(xb):
        if not truncate:
            raise ShapeError(f"lengths differ: {len(xa)} vs {len(xb)}")
        n = min(len(xa), len(xb))
        xa, xb = xa[:n], xb[:n]
    return AudioSignal(w_a * xa + w_b * xb, a.sample_rate_hz)


def split_train_validation(sig, train_fraction=0.9):
    """Split into the leading ``floor(N * train_fraction)`` samples and the rest."""
    if not 0.0 < train_fraction < 1.0:
        raise ParameterError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n_train = int(math.floor(len(sig) * train_fraction))
    return (AudioSignal(sig.samples[:n_train], sig.sample_rate_hz),
            AudioSignal(sig.samples[n_train:], sig.sample_rate_hz))


def _n_samples(duration_s, sample_rate_hz):
    if not duration_s > 0:
        raise ParameterError(f"duration must be positive, got {duration_s}")
    if not sample_rate_hz > 0:
        raise ParameterError(f"sample rate must be positive, got {sample_rate_hz}")
    return int(round(duration_s * sample_rate_hz))


def synth_impulse_train(pulse_rate_hz=20.0, decay_per_sample=0.99, duration_s=1.0,
                        sample_rate_hz=DEFAULT_SAMPLE_RATE, seed=0, jitter=0.02):
    """Exponentially decaying unit impulses repeating at ``pulse_rate_hz``.

    Onsets sit at ``(k + 1/2)`` periods, each displaced by a seeded uniform
    jitter of up to ``jitter`` periods.
    """
    n = _n_samples(duration_s, sample_rate_hz)
    if not 0.0 < pulse_rate_hz < sample_rate_hz / 2:
        raise ParameterError("pulse rate must be in (0, sample_rate/2)")
    if not 0.0 < decay_per_sample < 1.0:
        raise ParameterError(f"decay_per_sample must be in (0, 1), got {decay_per_sample}")
    if not 0.0 <= jitter < 0.5:
        raise ParameterError("jitter must be in [0, 0.5)")

    rng = np.random.default_rng(seed)
    period = sample_rate_hz / pulse_rate_hz
    n_pulses = int(math.floor(n / period + 0.5))
    offsets = rng.uniform(-jitter, jitter, size=n_pulses)
    onsets = np.round((np.arange(n_pulses) + 0.5 + offsets) * period).astype(np.int64)
    onsets = onsets[(onsets >= 0) & (onsets < n)]

    excitation = np.zeros(n)
    np.add.at(excitation, onsets, 1.0)
    out = sps.lfilter([1.0], [1.0, -decay_per_sample], excitation)
    return AudioSignal(out, sample_rate_hz)


def synth_filtered_noise(low_hz=100.0, high_hz=2000.0, duration_s=1.0,
                         sample_rate_hz=DEFAULT_SAMPLE_RATE, seed=0):
    """Seeded Gaussian white noise brick-wall filtered to ``[low_hz, high_hz]``."""
    n = _n_samples(duration_s, sample_rate_hz)
    if not 0.0 <= low_hz < high_hz <= sample_rate_hz / 2:
        raise ParameterError(f"invalid band [{low_hz}, {high_hz}] for sample rate "
                             f"{sample_rate_hz}")
    rng = np.random.default_rng(seed)
    spectrum = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate_hz)
    spectrum[(freqs < low_hz) | (freqs > high_hz)] = 0.0
    return AudioSignal(np.fft.irfft(spectrum, n=n), sample_rate_hz)
