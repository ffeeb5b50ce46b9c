import math

import numpy as np
import pytest

from tfmsep import neuralnet as nn
from tfmsep.errors import DataError, FormatError, LengthError, NumericError, ShapeError
from tfmsep.spectral import FeatureStats

from oracles import adam_trace, finite_difference_errors, random_model

SMALL = nn.ChunkSpec(bins=3, width_frames=4, overlap_frames=2)


# -- chunking -----------------------------------------------------------------

def test_default_chunk_spec():
    spec = nn.ChunkSpec()
    assert (spec.bins, spec.width_frames, spec.stride, spec.flat_len) == (65, 20, 10, 1300)


@pytest.mark.parametrize("frames, expected", [(30, 2), (20, 1), (1000, 99), (29, 1)])
def test_chunk_count(rng, frames, expected):
    rows = nn.chunk(rng.standard_normal((65, frames)))
    assert rows.shape == (expected, 1300)


def test_single_chunk_is_whole_matrix_frequency_fastest(rng):
    x = rng.standard_normal((65, 20))
    rows = nn.chunk(x)
    np.testing.assert_array_equal(rows[0], x.flatten(order="F"))


def test_chunk_layout_by_enumeration(rng):
    x = rng.standard_normal((3, 11))
    rows = nn.chunk(x, SMALL)
    for k in range(rows.shape[0]):
        for t in range(4):
            for b in range(3):
                assert rows[k, t * 3 + b] == x[b, 2 * k + t]


def test_chunk_coverage_1000_frames():
    rows = nn.chunk(np.tile(np.arange(1000.0), (65, 1)))
    seen = set(np.unique(rows).astype(int))
    enumerated = {s + t for s in range(0, 1000, 10) if s + 20 <= 1000 for t in range(20)}
    assert seen == enumerated
    assert set(range(990)) <= seen


def test_chunk_too_short():
    with pytest.raises(LengthError):
        nn.chunk(np.zeros((65, 19)))


def test_dechunk_inverts_chunk_on_covered_frames(rng):
    x = rng.standard_normal((3, 13))
    back, covered = nn.dechunk(nn.chunk(x, SMALL), SMALL, 13)
    assert covered.tolist() == [True] * 12 + [False]
    np.testing.assert_allclose(back[:, covered], x[:, covered], atol=1e-12)
    assert not np.any(back[:, ~covered])


def test_dechunk_single_chunk_verbatim(rng):
    rows = rng.standard_normal((1, 1300))
    back, covered = nn.dechunk(rows, nn.ChunkSpec(), 20)
    np.testing.assert_array_equal(back.flatten(order="F"), rows[0])
    assert covered.all()


def test_dechunk_averages_overlaps():
    rows = np.vstack([np.full(12, 0.2), np.full(12, 0.6)])
    back, _ = nn.dechunk(rows, SMALL, 6)
    assert back[0].tolist() == pytest.approx([0.2, 0.2, 0.4, 0.4, 0.6, 0.6])


def test_dechunk_inconsistent_count():
    with pytest.raises(ShapeError):
        nn.dechunk(np.zeros((3, 12)), SMALL, 6)


# -- forward / backward ---------------------------------------------------------

def _hand_forward(model, x):
    """Per-sample, per-unit forward pass written with plain Python loops."""
    out = []
    for sample in x:
        act = list(sample)
        for layer, (w, b) in enumerate(zip(model.weights, model.biases)):
            nxt = []
            for j in range(w.shape[1]):
                z = b[j] + sum(act[i] * w[i, j] for i in range(w.shape[0]))
                nxt.append(z if layer == len(model.weights) - 1 else 1 / (1 + math.exp(-z)))
            act = nxt
        out.append(act)
    return np.array(out)


def test_forward_matches_hand_loops(rng):
    model = random_model([4, 3, 3, 2], 11)
    x = rng.standard_normal((5, 4))
    out, acts = nn.forward(model, x)
    np.testing.assert_allclose(out, _hand_forward(model, x), atol=1e-12)
    assert len(acts) == 4


def test_zero_network():
    model = nn.init_model([6, 5, 5, 4], 0)
    model.weights = [np.zeros_like(w) for w in model.weights]
    out, acts = nn.forward(model, np.ones((3, 6)))
    assert not np.any(out)
    np.testing.assert_array_equal(acts[1], 0.5)
    np.testing.assert_array_equal(acts[2], 0.5)


def test_forward_rejects_bad_input():
    model = nn.init_model([4, 3, 3, 2], 0)
    with pytest.raises(ShapeError):
        nn.forward(model, np.zeros((2, 5)))
    with pytest.raises(NumericError):
        nn.forward(model, np.full((1, 4), np.inf))


def test_gradient_zero_at_target(rng):
    model = random_model([4, 3, 3, 2], 3)
    x = rng.standard_normal((6, 4))
    out, _ = nn.forward(model, x)
    grads = nn.backward(model, x, out)
    assert grads.loss == 0.0
    assert all(not np.any(g) for g in grads.params)


def test_scalar_chain_rule():
    model = nn.init_model([1, 1, 1, 1], 0)
    w1, w2, w3 = 0.7, -1.3, 0.9
    b1, b2, b3 = 0.1, 0.2, -0.3
    model.weights = [np.array([[w]]) for w in (w1, w2, w3)]
    model.biases = [np.array([b]) for b in (b1, b2, b3)]
    x, t = 0.5, 0.25
    h1 = 1 / (1 + math.exp(-(w1 * x + b1)))
    h2 = 1 / (1 + math.exp(-(w2 * h1 + b2)))
    y = w3 * h2 + b3
    dy = 2 * (y - t)
    d2 = dy * w3 * h2 * (1 - h2)
    d1 = d2 * w2 * h1 * (1 - h1)
    expected = {"w3": dy * h2, "b3": dy, "w2": d2 * h1, "b2": d2, "w1": d1 * x, "b1": d1}

    g = nn.backward(model, np.array([[x]]), np.array([[t]]))
    got = {"w1": g.weights[0][0, 0], "w2": g.weights[1][0, 0], "w3": g.weights[2][0, 0],
           "b1": g.biases[0][0], "b2": g.biases[1][0], "b3": g.biases[2][0]}
    for key, value in expected.items():
        assert got[key] == pytest.approx(value, rel=1e-14, abs=1e-16), key
    assert g.loss == pytest.approx((y - t) ** 2, rel=1e-14)


@pytest.mark.parametrize("seed", range(3))
def test_gradients_match_finite_differences(seed):
    assert finite_difference_errors(seed) < 1e-5


# -- ADAM -------------------------------------------------------------------------

def test_adam_zero_gradient_keeps_params(rng):
    params = [rng.standard_normal((3, 2)), rng.standard_normal(2)]
    state = nn.AdamState.for_params(params)
    new, state = nn.adam_step(params, [np.zeros((3, 2)), np.zeros(2)], state)
    for p, q in zip(params, new):
        np.testing.assert_array_equal(p, q)
    assert state.t == 1


def test_adam_first_step():
    state = nn.AdamState.for_params([np.zeros(1)])
    new, state = nn.adam_step([np.zeros(1)], [np.ones(1)], state)
    assert new[0][0] == pytest.approx(-1e-3, rel=1e-7)
    assert abs(new[0][0] - adam_trace([1.0])[0]) < 1e-12


def test_adam_two_steps():
    params = [np.zeros(1)]
    state = nn.AdamState.for_params(params)
    for _ in range(2):
        params, state = nn.adam_step(params, [np.ones(1)], state)
    assert abs(params[0][0] - adam_trace([1.0, 1.0])[1]) < 1e-12
    assert state.t == 2


# -- training ----------------------------------------------------------------------

def _toy_data(seed, n=90, width=12):
    r = np.random.default_rng(seed)
    x = r.standard_normal((n, width))
    y = 1 / (1 + np.exp(-x[:, ::-1]))
    return x, y


def test_train_is_deterministic():
    x, y = _toy_data(0)
    cfg = nn.TrainConfig(epochs=3, batch_size=16, seed=5)
    m1, h1 = nn.train(x, y, cfg, validation=(x[:10], y[:10]))
    m2, h2 = nn.train(x, y, cfg, validation=(x[:10], y[:10]))
    assert h1 == h2
    for p, q in zip(m1.params, m2.params):
        np.testing.assert_array_equal(p, q)


def test_train_step_count():
    x, y = _toy_data(1, n=100)
    calls = []
    original = nn.adam_step

    def counting(*args):
        calls.append(1)
        return original(*args)

    nn.adam_step = counting
    try:
        nn.train(x, y, nn.TrainConfig(epochs=3, batch_size=64, seed=0))
    finally:
        nn.adam_step = original
    assert len(calls) == 3 * 2


def test_constant_target_loss_decreases():
    x, _ = _toy_data(2, n=200)
    y = np.full((200, 12), 0.5)
    model = nn.init_model([12, 12, 12, 12], seed=1)
    start = nn.evaluate_mse(model, x, y)
    _, history = nn.train(x, y, nn.TrainConfig(3, 64, True, 2), model=model)
    losses = [start] + [row["train_mse"] for row in history]
    assert all(a > b for a, b in zip(losses, losses[1:]))


def test_train_rejects_empty_and_mismatch():
    with pytest.raises(DataError):
        nn.train(np.zeros((0, 4)), np.zeros((0, 4)))
    with pytest.raises(ShapeError):
        nn.train(np.zeros((3, 4)), np.zeros((2, 4)))


# -- inference and persistence -------------------------------------------------------

def test_estimate_mask_is_clamped(rng):
    model = nn.init_model([12, 12, 12, 12], 0)
    model.biases[-1] = np.linspace(-3, 3, 12)
    mask = nn.estimate_mask(model, rng.standard_normal((3, 15)), SMALL)
    assert mask.shape == (3, 15) and mask.kind == "soft"
    assert mask.data.min() >= 0 and mask.data.max() <= 1


def test_zero_model_gives_zero_mask(rng):
    model = nn.init_model([1300, 1300, 1300, 1300], 0)
    model.weights = [np.zeros_like(w) for w in model.weights]
    mask = nn.estimate_mask(model, rng.standard_normal((65, 45)))
    assert not np.any(mask.data)


def test_overfit_all_ones():
    r = np.random.default_rng(4)
    feats = r.standard_normal((3, 60))
    x = nn.chunk(feats, SMALL)
    y = np.ones_like(x)
    model, _ = nn.train(x, y, nn.TrainConfig(epochs=100, batch_size=8, seed=0),
                        layer_sizes=[12, 12, 12, 12], lr=1e-2)
    mask = nn.estimate_mask(model, feats, SMALL)
    _, covered = nn.dechunk(x, SMALL, 60)
    assert mask.data[:, covered].mean() > 0.9


def test_save_load_round_trip(tmp_path, rng):
    model = random_model([12, 10, 10, 12], 9)
    model.feature_stats = FeatureStats(-3.25, 1.75)
    model.metadata = {"note": "x"}
    path = tmp_path / "m.tfm"
    nn.save_model(model, path)
    back = nn.load_model(path)
    assert back.layer_sizes == model.layer_sizes
    assert back.feature_stats == model.feature_stats
    assert back.seed == model.seed and back.metadata == model.metadata
    for p, q in zip(model.params, back.params):
        np.testing.assert_array_equal(p, q)
    feats = rng.standard_normal((3, 20))
    np.testing.assert_array_equal(nn.estimate_mask(model, feats, SMALL).data,
                                  nn.estimate_mask(back, feats, SMALL).data)
    # identical models serialize to identical bytes
    nn.save_model(back, tmp_path / "again.tfm")
    assert path.read_bytes() == (tmp_path / "again.tfm").read_bytes()


def test_truncated_model(tmp_path):
    path = tmp_path / "m.tfm"
    nn.save_model(nn.init_model([4, 3, 3, 2], 0), path)
    blob = path.read_bytes()
    for cut in (5, 30, len(blob) - 1):
        path.write_bytes(blob[:cut])
        with pytest.raises(FormatError):
            nn.load_model(path)


def test_corrupt_model(tmp_path):
    path = tmp_path / "m.tfm"
    nn.save_model(nn.init_model([4, 3, 3, 2], 0), path)
    blob = bytearray(path.read_bytes())
    blob[-40] ^= 0xFF
    path.write_bytes(bytes(blob))
    with pytest.raises(FormatError, match="checksum"):
        nn.load_model(path)


def test_unknown_model_version(tmp_path):
    path = tmp_path / "m.tfm"
    nn.save_model(nn.init_model([4, 3, 3, 2], 0), path)
    blob = bytearray(path.read_bytes())
    blob[8:12] = (7).to_bytes(4, "little")
    path.write_bytes(bytes(blob))
    with pytest.raises(FormatError, match="version 7"):
        nn.load_model(path)
