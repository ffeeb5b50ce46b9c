# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for overlap-add synthesis and chunk recombination."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def overlap_add(double[::1] out, frames, Py_ssize_t hop, Py_ssize_t offset):
    cdef const double[:, ::1] fr = np.ascontiguousarray(frames, dtype=np.float64)
    cdef Py_ssize_t n_frames = fr.shape[0]
    cdef Py_ssize_t width = fr.shape[1]
    cdef Py_ssize_t f, j, start
    if n_frames and offset + (n_frames - 1) * hop + width > out.shape[0]:
        raise IndexError("frames extend past the output buffer")
    with nogil:
        for f in range(n_frames):
            start = offset + f * hop
            for j in range(width):
                out[start + j] += fr[f, j]
    return None


def window_envelope(window_sq, Py_ssize_t hop, Py_ssize_t n_frames, Py_ssize_t out_len):
    cdef const double[::1] w = np.ascontiguousarray(window_sq, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_arr = np.zeros(out_len, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t width = w.shape[0]
    cdef Py_ssize_t f, j, start
    if n_frames and (n_frames - 1) * hop + width > out_len:
        raise IndexError("frames extend past out_len")
    with nogil:
        for f in range(n_frames):
            start = f * hop
            for j in range(width):
                out[start + j] += w[j]
    return out_arr


def chunk_accumulate(rows, Py_ssize_t bins, Py_ssize_t width, Py_ssize_t stride,
                     Py_ssize_t n_frames):
    cdef const double[:, ::1] r = np.ascontiguousarray(rows, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] sums_arr = np.zeros((bins, n_frames), dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] counts_arr = np.zeros(n_frames, dtype=np.int64)
    cdef double[:, ::1] sums = sums_arr
    cdef cnp.int64_t[::1] counts = counts_arr
    cdef Py_ssize_t n_chunks = r.shape[0]
    cdef Py_ssize_t k, t, b, start
    if n_chunks and (n_chunks - 1) * stride + width > n_frames:
        raise IndexError("chunks extend past n_frames")
    if r.shape[1] != bins * width:
        raise ValueError("row length does not equal bins * width")
    with nogil:
        for k in range(n_chunks):
            start = k * stride
            for t in range(width):
                counts[start + t] += 1
                for b in range(bins):
                    sums[b, start + t] += r[k, t * bins + b]
    return sums_arr, counts_arr
