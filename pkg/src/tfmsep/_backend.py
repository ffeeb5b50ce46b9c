"""Select the compiled kernels when available, else the numpy fallback.

Set ``TFMSEP_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _fallback

BACKEND = "python"
kernels = _fallback

if os.environ.get("TFMSEP_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as kernels  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        kernels = _fallback

overlap_add = kernels.overlap_add
window_envelope = kernels.window_envelope
chunk_accumulate = kernels.chunk_accumulate
