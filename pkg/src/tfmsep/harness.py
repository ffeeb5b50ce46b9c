"""End-to-end pipeline: synthesize or load sources, mix, train, separate, evaluate.

All randomness comes from ``RunConfig.seed``: ``seed + 1`` initializes the
network, ``seed + 2`` shuffles minibatches, ``seed + 3`` drives the source
generators and ``seed + 4`` seeds FastICA.
"""
import copy
import csv
import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from . import audio, bsseval, fastica, masking, neuralnet, spectral
from .errors import ConfigError, DataError, LengthError, UsageError

log = logging.getLogger(__name__)

METHODS = ("oracle-binary", "oracle-soft", "dnn", "fastica")
SOURCE_NAMES = ("excavator", "jackhammer")
MODEL_FILENAME = "model.tfm"

DEFAULT_SOURCE_A = {"kind": "filtered_noise", "low_hz": 100.0, "high_hz": 2000.0}
DEFAULT_SOURCE_B = {"kind": "impulse_train", "pulse_rate_hz": 20.0, "decay_per_sample": 0.99}

_SYNTH_KEYS = {
    "filtered_noise": {"kind", "low_hz", "high_hz"},
    "impulse_train": {"kind", "pulse_rate_hz", "decay_per_sample", "jitter"},
}
_FILE_KEYS = {"path", "channel"}


@dataclass
class RunConfig:
    """Run settings. Field defaults are the full-scale settings (44.1 kHz, 60 s,
    hop 1); :meth:`desk` gives the lighter profile the CLI uses by default."""

    source_a: dict = field(default_factory=lambda: dict(DEFAULT_SOURCE_A))
    source_b: dict = field(default_factory=lambda: dict(DEFAULT_SOURCE_B))
    sample_rate_hz: int = 44100
    duration_s: float = 60.0
    train_fraction: float = 0.9
    mix_weights: tuple = (1.0, 1.0)
    stft: spectral.StftParams = field(default_factory=spectral.StftParams)
    chunk: neuralnet.ChunkSpec = field(default_factory=neuralnet.ChunkSpec)
    train: neuralnet.TrainConfig = field(default_factory=neuralnet.TrainConfig)
    learning_rate: float = 1e-3
    method: str = "oracle-soft"
    seed: int = 0
    out_dir: str = "out"
    model_path: str = None
    wav_encoding: str = "float32"

    @classmethod
    def full_scale(cls):
        return cls()

    @classmethod
    def desk(cls):
        return cls(sample_rate_hz=16000, duration_s=10.0,
                   stft=spectral.StftParams(128, 64, 128))

    @classmethod
    def from_dict(cls, doc, base=None):
        """Overlay a JSON-style dict onto ``base`` (default :meth:`desk`)."""
        cfg = copy.deepcopy(base) if base is not None else cls.desk()
        if not isinstance(doc, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        for key, value in doc.items():
            if key == "stft":
                cfg.stft = _build(spectral.StftParams, "stft", value, cfg.stft)
            elif key == "chunk":
                cfg.chunk = _build(neuralnet.ChunkSpec, "chunk", value, cfg.chunk)
            elif key == "train":
                cfg.train = _build(neuralnet.TrainConfig, "train", value, cfg.train,
                                   allowed={"epochs", "batch_size", "shuffle"})
            elif key in _SCALARS:
                setattr(cfg, key, value)
            else:
                raise ConfigError(key, "unknown key")
        cfg.validate()
        return cfg

    def to_dict(self):
        return {
            "source_a": self.source_a,
            "source_b": self.source_b,
            "sample_rate_hz": self.sample_rate_hz,
            "duration_s": self.duration_s,
            "train_fraction": self.train_fraction,
            "mix_weights": list(self.mix_weights),
            "stft": vars(self.stft),
            "chunk": vars(self.chunk),
            "train": {"epochs": self.train.epochs, "batch_size": self.train.batch_size,
                      "shuffle": self.train.shuffle},
            "learning_rate": self.learning_rate,
            "method": self.method,
            "seed": self.seed,
            "out_dir": self.out_dir,
            "model_path": self.model_path,
            "wav_encoding": self.wav_encoding,
        }

    def validate(self):
        _check_type("seed", self.seed, int)
        _check_type("sample_rate_hz", self.sample_rate_hz, int)
        if self.sample_rate_hz <= 0:
            raise ConfigError("sample_rate_hz", "must be positive")
        _check_type("duration_s", self.duration_s, (int, float))
        if not self.duration_s > 0:
            raise ConfigError("duration_s", f"must be positive, got {self.duration_s}")
        _check_type("train_fraction", self.train_fraction, (int, float))
        if not 0 < self.train_fraction < 1:
            raise ConfigError("train_fraction", "must be in (0, 1)")
        if (not isinstance(self.mix_weights, (list, tuple)) or len(self.mix_weights) != 2
                or not all(isinstance(w, (int, float)) and not isinstance(w, bool)
                           for w in self.mix_weights)):
            raise ConfigError("mix_weights", "must be a pair of numbers")
        self.mix_weights = tuple(float(w) for w in self.mix_weights)
        _check_type("learning_rate", self.learning_rate, (int, float))
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate", "must be positive")
        if self.method not in METHODS:
            raise ConfigError("method", f"must be one of {', '.join(METHODS)}")
        if self.wav_encoding not in ("float32", "pcm16"):
            raise ConfigError("wav_encoding", "must be 'float32' or 'pcm16'")
        _check_type("out_dir", self.out_dir, str)
        if self.model_path is not None:
            _check_type("model_path", self.model_path, str)
        if self.chunk.bins != self.stft.bins:
            raise ConfigError("chunk.bins", f"must equal the STFT bin count {self.stft.bins}")
        for name in ("source_a", "source_b"):
            _validate_source(name, getattr(self, name), self.sample_rate_hz)
        return self

    def with_overrides(self, **overrides):
        cfg = copy.deepcopy(self)
        for key, value in overrides.items():
            if value is not None:
                setattr(cfg, key, value)
        return cfg.validate()


_SCALARS = {"source_a", "source_b", "sample_rate_hz", "duration_s", "train_fraction",
            "mix_weights", "learning_rate", "method", "seed", "out_dir", "model_path",
            "wav_encoding"}


def _check_type(path, value, types):
    if isinstance(value, bool) or not isinstance(value, types):
        raise ConfigError(path, f"wrong type {type(value).__name__}")


def _build(cls, path, value, current, allowed=None):
    if not isinstance(value, dict):
        raise ConfigError(path, "must be an object")
    fields = dict(vars(current))
    allowed = allowed or set(fields)
    for key, item in value.items():
        if key not in allowed:
            raise ConfigError(f"{path}.{key}", "unknown key")
        expected = bool if isinstance(fields[key], bool) else int
        if not isinstance(item, expected) or (expected is int and isinstance(item, bool)):
            raise ConfigError(f"{path}.{key}", f"wrong type {type(item).__name__}")
        fields[key] = item
    try:
        return cls(**fields)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from exc


def _validate_source(name, spec, sample_rate_hz):
    if not isinstance(spec, dict):
        raise ConfigError(name, "must be an object")
    if "path" in spec:
        extra = set(spec) - _FILE_KEYS
        if extra:
            raise ConfigError(f"{name}.{sorted(extra)[0]}", "unknown key")
        return
    kind = spec.get("kind")
    if kind not in _SYNTH_KEYS:
        raise ConfigError(f"{name}.kind", f"must be one of {sorted(_SYNTH_KEYS)} "
                                          "or give a 'path'")
    extra = set(spec) - _SYNTH_KEYS[kind]
    if extra:
        raise ConfigError(f"{name}.{sorted(extra)[0]}", "unknown key")
    for key in _SYNTH_KEYS[kind] - {"kind"}:
        if key in spec:
            _check_type(f"{name}.{key}", spec[key], (int, float))
    try:
        # a tiny dry run applies the generator's own parameter checks
        _synthesize(spec, 4.0 / sample_rate_hz, sample_rate_hz, 0)
    except ValueError as exc:
        raise ConfigError(name, str(exc)) from exc


def _synthesize(spec, duration_s, sample_rate_hz, seed):
    params = {k: v for k, v in spec.items() if k != "kind"}
    if spec["kind"] == "filtered_noise":
        return audio.synth_filtered_noise(duration_s=duration_s, sample_rate_hz=sample_rate_hz,
                                          seed=seed, **params)
    return audio.synth_impulse_train(duration_s=duration_s, sample_rate_hz=sample_rate_hz,
                                     seed=seed, **params)


def load_sources(cfg):
    """Return the two unit-RMS sources described by ``cfg``."""
    out = []
    for spec in (cfg.source_a, cfg.source_b):
        if "path" in spec:
            sig = audio.read_wav(spec["path"], spec.get("channel"))
        else:
            sig = _synthesize(spec, cfg.duration_s, cfg.sample_rate_hz, cfg.seed + 3)
        out.append(audio.normalize_power(sig))
    a, b = out
    if a.sample_rate_hz != b.sample_rate_hz:
        raise DataError(f"source sample rates differ: {a.sample_rate_hz} vs {b.sample_rate_hz}")
    n = min(len(a), len(b))
    return (audio.AudioSignal(a.samples[:n], a.sample_rate_hz),
            audio.AudioSignal(b.samples[:n], b.sample_rate_hz))


@dataclass
class Segment:
    """Sources and their mixture over one stretch of time."""

    a: audio.AudioSignal
    b: audio.AudioSignal
    mixture: audio.AudioSignal


def prepare_segments(cfg, sources=None):
    a, b = sources or load_sources(cfg)
    mixture = audio.mix(a, b, *cfg.mix_weights)
    parts = [audio.split_train_validation(s, cfg.train_fraction) for s in (a, b, mixture)]
    train = Segment(parts[0][0], parts[1][0], parts[2][0])
    valid = Segment(parts[0][1], parts[1][1], parts[2][1])
    for label, seg in (("training", train), ("validation", valid)):
        frames = cfg.stft.n_frames(len(seg.mixture))
        if frames < cfg.chunk.width_frames:
            raise LengthError(f"{label} segment has {frames} STFT frames; at least "
                              f"{cfg.chunk.width_frames} are needed for one chunk")
    return train, valid


def _ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def cmd_synth(cfg):
    """Write the two synthetic sources (unit RMS) as WAV files; return their paths."""
    for name in ("source_a", "source_b"):
        if "path" in getattr(cfg, name):
            raise ConfigError(name, "synth needs a generator spec, not a file path")
    a, b = load_sources(cfg)
    out = _ensure_dir(cfg.out_dir)
    paths = []
    for name, sig in zip(SOURCE_NAMES, (a, b)):
        path = os.path.join(out, f"{name}.wav")
        audio.write_wav(path, sig, cfg.wav_encoding)
        paths.append(path)
    log.info("wrote %s", ", ".join(paths))
    return paths


def _masks_and_features(cfg, seg, stats=None):
    mix_spec = spectral.stft(seg.mixture, cfg.stft)
    mag_a = spectral.stft(seg.a, cfg.stft).magnitude()
    mag_b = spectral.stft(seg.b, cfg.stft).magnitude()
    feats, stats = spectral.log_features(mix_spec.magnitude(), stats)
    return mix_spec, feats, stats, masking.soft_mask(mag_a, mag_b)


def cmd_train(cfg):
    """Train the mask estimator; write the model file and ``history.csv``."""
    train_seg, valid_seg = prepare_segments(cfg)
    _, feats_t, stats, target_t = _masks_and_features(cfg, train_seg)
    _, feats_v, _, target_v = _masks_and_features(cfg, valid_seg, stats)
    x_t, y_t = neuralnet.chunk(feats_t, cfg.chunk), neuralnet.chunk(target_t.data, cfg.chunk)
    x_v, y_v = neuralnet.chunk(feats_v, cfg.chunk), neuralnet.chunk(target_v.data, cfg.chunk)
    log.info("training on %d chunks, validating on %d", x_t.shape[0], x_v.shape[0])

    n = cfg.chunk.flat_len
    init = neuralnet.init_model((n, n, n, n), seed=cfg.seed + 1, feature_stats=stats)
    init.metadata = {"stft": vars(cfg.stft), "chunk": vars(cfg.chunk),
                     "sample_rate_hz": cfg.sample_rate_hz}
    train_cfg = neuralnet.TrainConfig(cfg.train.epochs, cfg.train.batch_size,
                                      cfg.train.shuffle, cfg.seed + 2)
    model, history = neuralnet.train(
        x_t, y_t, train_cfg, validation=(x_v, y_v), model=init, lr=cfg.learning_rate,
        log=lambda row: log.info("epoch %(epoch)d train_mse=%(train_mse).6f "
                                 "val_mse=%(val_mse).6f", row))

    out = _ensure_dir(cfg.out_dir)
    model_path = cfg.model_path or os.path.join(out, MODEL_FILENAME)
    neuralnet.save_model(model, model_path)
    history_path = os.path.join(out, "history.csv")
    with open(history_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "train_mse", "val_mse"])
        for row in history:
            writer.writerow([row["epoch"], repr(row["train_mse"]), repr(row["val_mse"])])
    return model_path, history


def _load_model_for(cfg):
    path = cfg.model_path or os.path.join(cfg.out_dir, MODEL_FILENAME)
    if not os.path.exists(path):
        raise UsageError(f"method 'dnn' needs a trained model; {path} does not exist "
                         "(run 'tfmsep train' first or pass --model)")
    model = neuralnet.load_model(path)
    meta = model.metadata
    if meta.get("stft") and meta["stft"] != vars(cfg.stft):
        raise ConfigError("stft", f"model was trained with {meta['stft']}")
    if meta.get("chunk") and meta["chunk"] != vars(cfg.chunk):
        raise ConfigError("chunk", f"model was trained with {meta['chunk']}")
    if model.feature_stats is None:
        raise DataError(f"{path}: model has no feature statistics")
    return model


def separate(cfg, method, valid, model=None):
    """Separate the validation mixture; return ``[(label, estimates, result, info)]``."""
    refs = [valid.a, valid.b]
    if method == "fastica":
        obs = fastica.HARNESS_MIXING @ np.vstack([valid.a.samples, valid.b.samples])
        runs = []
        for contrast in (fastica.NEGENTROPY, fastica.KURTOSIS):
            ica = fastica.fit(obs, contrast, seed=cfg.seed + 4)
            sources = fastica.ica_separate(obs, ica)
            estimates = [audio.AudioSignal(row, valid.a.sample_rate_hz) for row in sources]
            info = {"converged": bool(ica.converged), "iterations": int(ica.iterations_used)}
            runs.append((f"fastica-{contrast}", estimates,
                         bsseval.evaluate(estimates, refs), info))
        return runs

    mix_spec = spectral.stft(valid.mixture, cfg.stft)
    if method == "dnn":
        feats, _ = spectral.log_features(mix_spec.magnitude(), model.feature_stats)
        mask = neuralnet.estimate_mask(model, feats, cfg.chunk)
    else:
        mag_a = spectral.stft(valid.a, cfg.stft).magnitude()
        mag_b = spectral.stft(valid.b, cfg.stft).magnitude()
        build = masking.binary_mask if method == "oracle-binary" else masking.soft_mask
        mask = build(mag_a, mag_b)
    estimates = [masking.reconstruct(mask, mix_spec),
                 masking.reconstruct(masking.complement(mask), mix_spec)]
    return [(method, estimates, bsseval.evaluate(estimates, refs), {})]


def write_report(out_dir, rows, info=None):
    _ensure_dir(out_dir)
    with open(os.path.join(out_dir, "metrics.csv"), "w", newline="") as fh:
        fh.write(bsseval.rows_to_csv(rows))
    with open(os.path.join(out_dir, "metrics.json"), "w") as fh:
        fh.write(bsseval.rows_to_json(rows, info))


def cmd_separate(cfg):
    """Separate the held-out mixture with ``cfg.method`` and score it.

    Writes the estimates, the matching validation-segment references and the
    metric report to ``cfg.out_dir``.
    """
    model = _load_model_for(cfg) if cfg.method == "dnn" else None
    _, valid = prepare_segments(cfg)
    runs = separate(cfg, cfg.method, valid, model)

    out = _ensure_dir(cfg.out_dir)
    for name, ref in zip(SOURCE_NAMES, (valid.a, valid.b)):
        audio.write_wav(os.path.join(out, f"reference_{name}.wav"), ref, cfg.wav_encoding)
    rows, info = [], {}
    for label, estimates, result, extra in runs:
        for i, est in enumerate(estimates):
            audio.write_wav(os.path.join(out, f"estimate_{label}_{i}.wav"), est,
                            cfg.wav_encoding)
        rows.extend(bsseval.report_rows(label, result, list(SOURCE_NAMES)))
        if extra:
            info[label] = extra
    write_report(out, rows, info)
    return rows, info


def cmd_evaluate(estimate_paths, reference_paths, out_dir=None, method="external"):
    """Score WAV estimates against WAV references; optionally write the report."""
    if len(estimate_paths) != len(reference_paths):
        raise UsageError(f"{len(estimate_paths)} estimates vs {len(reference_paths)} references")
    estimates = [audio.read_wav(p) for p in estimate_paths]
    references = [audio.read_wav(p) for p in reference_paths]
    result = bsseval.evaluate(estimates, references)
    names = [os.path.splitext(os.path.basename(p))[0] for p in estimate_paths]
    rows = bsseval.report_rows(method, result, names)
    if out_dir is not None:
        write_report(out_dir, rows)
    return rows


def format_table(rows):
    """Plain-text table of report rows, one line per estimate."""
    lines = [f"{'method':<22}{'source':<14}{'SDR dB':>10}{'SIR dB':>10}{'SAR dB':>10}  perm"]
    for row in rows:
        cells = [row[k] for k in ("sdr_db", "sir_db", "sar_db")]
        shown = [f"{c:>10.2f}" if isinstance(c, float) else f"{c:>10}" for c in cells]
        lines.append(f"{row['method']:<22}{row['source']:<14}{''.join(shown)}  "
                     f"{row['permutation']}")
    return "\n".join(lines)


def load_config_file(path, base):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"{path} is not valid JSON ({exc})") from exc
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read config file {path} ({exc})") from exc
    return RunConfig.from_dict(doc, base)
