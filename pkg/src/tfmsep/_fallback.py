"""Pure numpy implementations of the inner loops in ``_kernels.pyx``.

Signatures and results match the compiled versions exactly; the test suite
checks both against each other.
"""
import numpy as np


def overlap_add(out, frames, hop, offset):
    """Add ``frames[f]`` into ``out`` in place, starting at ``offset + f * hop``."""
    frames = np.asarray(frames, dtype=np.float64)
    n_frames, width = frames.shape
    if n_frames == 0:
        return None
    if offset + (n_frames - 1) * hop + width > out.shape[0]:
        raise IndexError("frames extend past the output buffer")
    span = (n_frames - 1) * hop + 1
    # one strided add per window offset instead of one per frame
    for j in range(width):
        out[offset + j:offset + j + span:hop] += frames[:, j]
    return None


def window_envelope(window_sq, hop, n_frames, out_len):
    window_sq = np.asarray(window_sq, dtype=np.float64)
    out = np.zeros(out_len, dtype=np.float64)
    if n_frames == 0:
        return out
    if (n_frames - 1) * hop + window_sq.shape[0] > out_len:
        raise IndexError("frames extend past out_len")
    span = (n_frames - 1) * hop + 1
    for j in range(window_sq.shape[0]):
        out[j:j + span:hop] += window_sq[j]
    return out


def chunk_accumulate(rows, bins, width, stride, n_frames):
    """Scatter flattened chunks back onto a ``bins x n_frames`` grid.

    Returns the per-cell sum of all chunk values and the per-frame count of
    chunks covering that frame.
    """
    rows = np.ascontiguousarray(rows, dtype=np.float64)
    n_chunks = rows.shape[0]
    if n_chunks and (n_chunks - 1) * stride + width > n_frames:
        raise IndexError("chunks extend past n_frames")
    if rows.shape[1] != bins * width:
        raise ValueError("row length does not equal bins * width")
    sums_t = np.zeros((n_frames, bins), dtype=np.float64)
    counts = np.zeros(n_frames, dtype=np.int64)
    blocks = rows.reshape(n_chunks, width, bins)
    for k in range(n_chunks):
        start = k * stride
        sums_t[start:start + width] += blocks[k]
        counts[start:start + width] += 1
    return np.ascontiguousarray(sums_t.T), counts
