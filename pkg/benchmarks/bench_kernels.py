"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py            # 10 s at 44.1 kHz, hop 1
    python benchmarks/bench_kernels.py --seconds 60   # full-length signal

Also times a complete ``istft`` with each backend swapped in.
"""
import argparse
import time

import numpy as np

from tfmsep import _backend, _fallback, spectral
from tfmsep.audio import AudioSignal

try:
    from tfmsep import _kernels
except ImportError:
    _kernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def run_istft(backend, spec):
    saved = _backend.overlap_add, _backend.window_envelope
    _backend.overlap_add, _backend.window_envelope = backend.overlap_add, backend.window_envelope
    try:
        return spectral.istft(spec)
    finally:
        _backend.overlap_add, _backend.window_envelope = saved


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seconds", type=float, default=10.0)
    ap.add_argument("--rate", type=int, default=44100)
    ap.add_argument("--hop", type=int, default=1)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    backends = [("python", _fallback)]
    if _kernels is not None:
        backends.append(("cython", _kernels))
    else:
        print("compiled kernels not built; timing the fallback only")

    rng = np.random.default_rng(0)
    n = int(args.seconds * args.rate)
    params = spectral.StftParams(128, args.hop, 128)
    n_frames = params.n_frames(n)
    frames = rng.standard_normal((n_frames, 128))
    w2 = spectral.hann_window(128) ** 2
    rows = rng.standard_normal((n_frames // 10 - 1, 1300))
    chunk_frames = (rows.shape[0] - 1) * 10 + 20
    spec = spectral.stft(AudioSignal(rng.standard_normal(n), args.rate), params)

    print(f"signal {args.seconds:g} s @ {args.rate} Hz, hop {args.hop}: {n_frames} frames")
    print(f"{'kernel':<18}" + "".join(f"{name:>12}" for name, _ in backends))
    cases = {
        "overlap_add": lambda k: k.overlap_add(np.zeros(n), frames, args.hop, 0),
        "window_envelope": lambda k: k.window_envelope(w2, args.hop, n_frames, n),
        "chunk_accumulate": lambda k: k.chunk_accumulate(rows, 65, 20, 10, chunk_frames),
        "istft (total)": lambda k: run_istft(k, spec),
    }
    for label, case in cases.items():
        cells = [best_of(lambda: case(k), args.repeat) for _, k in backends]
        print(f"{label:<18}" + "".join(f"{t * 1e3:>10.1f}ms" for t in cells))


if __name__ == "__main__":
    main()
