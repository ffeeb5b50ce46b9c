import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tfmsep import spectral
from tfmsep.audio import AudioSignal
from tfmsep.errors import (
    DegenerateFeaturesError,
    DegenerateParamsError,
    LengthError,
    ParameterError,
)
from tfmsep.spectral import StftParams

HOP1 = StftParams(128, 1, 128)
HOP64 = StftParams(128, 64, 128)


def test_hann_len4():
    np.testing.assert_allclose(spectral.hann_window(4), [0.0, 0.75, 0.75, 0.0], atol=1e-15)


def test_hann_len128_shape():
    w = spectral.hann_window(128)
    assert w[0] == 0.0 and w[127] == 0.0
    np.testing.assert_array_equal(w, w[::-1])
    assert w[63] == w[64] == w.max()


def test_hann_matches_formula_and_sum_of_squares():
    w = spectral.hann_window(128)
    direct = [0.5 * (1 - math.cos(2 * math.pi * n / 127)) for n in range(128)]
    np.testing.assert_allclose(w, direct, atol=1e-15)
    # closed form of sum w^2 for the symmetric Hann: 3(L-1)/8
    assert math.fsum(v * v for v in direct) == pytest.approx(3 * 127 / 8, rel=1e-13)
    assert float(np.sum(w ** 2)) == pytest.approx(3 * 127 / 8, rel=1e-13)


def test_hann_too_short():
    with pytest.raises(ParameterError):
        spectral.hann_window(1)


@pytest.mark.parametrize("kwargs", [dict(window_len=128, hop=0, fft_len=128),
                                    dict(window_len=128, hop=129, fft_len=128),
                                    dict(window_len=256, hop=1, fft_len=128)])
def test_bad_params(kwargs):
    with pytest.raises(ParameterError):
        StftParams(**kwargs)


def test_hop1_bins_and_frames():
    assert HOP1.bins == 65
    assert HOP1.n_frames(2_646_000) == 2_645_873


def test_stft_of_zeros():
    spec = spectral.stft(AudioSignal(np.zeros(1000), 16000), HOP64)
    assert spec.shape == (65, 14)
    assert not np.any(spec.data)


def test_stft_of_constant_is_window_sum_at_dc():
    spec = spectral.stft(AudioSignal(np.ones(600), 16000), HOP1)
    w_sum = spectral.hann_window(128).sum()
    np.testing.assert_allclose(spec.data[0], w_sum, rtol=1e-12)
    # each frame's spectrum is the window's own DFT, summed directly here
    w = spectral.hann_window(128)
    window_dft = [sum(w[n] * np.exp(-2j * np.pi * k * n / 128) for n in range(128))
                  for k in range(65)]
    np.testing.assert_allclose(spec.data[:, 0], window_dft, atol=1e-11)
    np.testing.assert_array_equal(spec.data[:, 0], spec.data[:, -1])
    # the symmetric window is not periodic in the FFT length; leakage stays small
    assert np.max(np.abs(spec.data[2:])) < 0.01 * w_sum


def test_stft_too_short():
    with pytest.raises(LengthError):
        spectral.stft(AudioSignal(np.zeros(127), 16000), HOP1)


def test_stft_matches_direct_dft(rng):
    x = rng.standard_normal(300)
    p = StftParams(16, 5, 32)
    spec = spectral.stft(AudioSignal(x, 8000), p)
    w = spectral.hann_window(16)
    k = np.arange(p.bins)[:, None]
    n = np.arange(16)[None, :]
    basis = np.exp(-2j * np.pi * k * n / 32)
    for f in range(spec.shape[1]):
        frame = x[f * 5:f * 5 + 16] * w
        np.testing.assert_allclose(spec.data[:, f], basis @ frame, atol=1e-12)


@pytest.mark.parametrize("params", [HOP1, HOP64, StftParams(100, 7, 128)])
def test_round_trip(rng, params):
    x = rng.uniform(-1, 1, 44100)
    spec = spectral.stft(AudioSignal(x, 44100), params)
    y = spectral.istft(spec).samples
    assert y.shape == x.shape
    n_frames = spec.shape[1]
    lo, hi = params.window_len - 1, (n_frames - 1) * params.hop + 1
    assert np.max(np.abs(y[lo:hi] - x[lo:hi])) < 1e-9
    # the weighted overlap-add inverts every sample with nonzero window weight
    last = (n_frames - 1) * params.hop + params.window_len - 1
    assert np.max(np.abs(y[1:last] - x[1:last])) < 1e-9
    assert y[0] == 0.0 and not np.any(y[last:])


def test_istft_of_zeros():
    spec = spectral.stft(AudioSignal(np.zeros(1000), 16000), HOP64)
    assert not np.any(spectral.istft(spec.with_data(np.zeros_like(spec.data))).samples)


def test_istft_hop_equal_window_has_gaps(rng):
    spec = spectral.stft(AudioSignal(rng.standard_normal(1024), 16000), StftParams(128, 128, 128))
    with pytest.raises(DegenerateParamsError):
        spectral.istft(spec)


def test_parseval_single_frame(rng):
    x = rng.standard_normal(128)
    spec = spectral.stft(AudioSignal(x, 16000), HOP1)
    big_x = spec.data[:, 0]
    lhs = np.sum((x * spectral.hann_window(128)) ** 2)
    rhs = (abs(big_x[0]) ** 2 + 2 * np.sum(np.abs(big_x[1:64]) ** 2) + abs(big_x[64]) ** 2) / 128
    assert rhs == pytest.approx(lhs, rel=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_stft_is_linear(seed, alpha, beta):
    r = np.random.default_rng(seed)
    x, y = r.standard_normal(400), r.standard_normal(400)
    p = StftParams(128, 16, 128)
    lhs = spectral.stft(AudioSignal(alpha * x + beta * y, 8000), p).data
    rhs = (alpha * spectral.stft(AudioSignal(x, 8000), p).data
           + beta * spectral.stft(AudioSignal(y, 8000), p).data)
    np.testing.assert_allclose(lhs, rhs, atol=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 64).flatmap(
    lambda w: st.tuples(st.just(w), st.integers(1, w), st.integers(0, 400))))
def test_frame_count_matches_enumeration(args):
    window, hop, n = args
    p = StftParams(window, hop, window + (window % 2))
    enumerated = sum(1 for start in range(0, n, hop) if start + window <= n)
    assert p.n_frames(n) == enumerated
    if n >= window:
        spec = spectral.stft(AudioSignal(np.zeros(n), 8000), p)
        assert spec.shape[1] == enumerated


def test_log_features_training_moments(rng):
    mag = rng.exponential(size=(65, 300))
    feats, stats = spectral.log_features(mag)
    assert abs(feats.mean()) < 1e-9
    assert abs(feats.std() - 1) < 1e-9
    assert stats.epsilon == 1e-10
    again, same = spectral.log_features(mag, stats)
    np.testing.assert_array_equal(again, feats)
    assert same == stats


def test_log_features_constant_is_degenerate():
    mag = np.full((65, 40), math.e - 1e-10)
    with pytest.raises(DegenerateFeaturesError):
        spectral.log_features(mag)


def test_log_features_rejects_negative():
    with pytest.raises(ParameterError):
        spectral.log_features(-np.ones((2, 2)))


def test_dump_csv_layout(tmp_path):
    m = np.arange(6.0).reshape(2, 3)
    spectral.dump_csv(tmp_path / "s.csv", m)
    assert (tmp_path / "s.csv").read_text().splitlines() == ["0,1,2", "3,4,5"]
