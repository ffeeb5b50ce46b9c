"""Oracle time-frequency masks and masked reconstruction with the mixture phase."""
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ShapeError
from .spectral import istft

BINARY = "binary"
SOFT = "soft"


@dataclass(frozen=True, eq=False)
class Mask:
    """Real ``bins x frames`` mask; binary entries are 0/1, soft entries lie in [0, 1]."""

    data: np.ndarray
    kind: str = SOFT

    def __post_init__(self):
        m = np.asarray(self.data, dtype=np.float64)
        if m.ndim != 2:
            raise ShapeError(f"mask must be 2-D, got shape {m.shape}")
        if self.kind == BINARY:
            if not np.all((m == 0.0) | (m == 1.0)):
                raise ParameterError("binary mask entries must be 0 or 1")
        elif self.kind == SOFT:
            if not np.all((m >= 0.0) & (m <= 1.0)):
                raise ParameterError("soft mask entries must lie in [0, 1]")
        else:
            raise ParameterError(f"unknown mask kind {self.kind!r}")
        object.__setattr__(self, "data", m)

    @property
    def shape(self):
        return self.data.shape


def _check_pair(mag_a, mag_b):
    a = np.asarray(mag_a, dtype=np.float64)
    b = np.asarray(mag_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"magnitude shapes differ: {a.shape} vs {b.shape}")
    if np.any(a < 0) or np.any(b < 0):
        raise ParameterError("magnitudes must be non-negative")
    return a, b


def soft_mask(mag_a, mag_b):
    """Ratio ``a / (a + b)`` per cell; cells where both are zero get 0.5.

    The smaller magnitude is always the one divided, the other cell value is
    one minus it; this makes ``soft_mask(a, b) + soft_mask(b, a)`` exactly 1.
    """
    a, b = _check_pair(mag_a, mag_b)
    total = a + b
    out = np.full(a.shape, 0.5)
    live = total > 0
    ratio_a = np.divide(a, total, out=np.zeros(a.shape), where=live)
    ratio_b = np.divide(b, total, out=np.zeros(a.shape), where=live)
    np.copyto(out, np.where(a <= b, ratio_a, 1.0 - ratio_b), where=live)
    return Mask(out, SOFT)


def binary_mask(mag_a, mag_b):
    """1 where source ``a`` has at least the power of ``b``, else 0.

    Comparing magnitudes is equivalent to comparing powers and cannot overflow.
    Ties go to ``a``.
    """
    a, b = _check_pair(mag_a, mag_b)
    return Mask((a >= b).astype(np.float64), BINARY)


def complement(mask):
    return Mask(1.0 - mask.data, mask.kind)


def apply_mask(mask, mixture_spec):
    if mask.shape != mixture_spec.shape:
        raise ShapeError(f"mask shape {mask.shape} does not match spectrogram "
                         f"shape {mixture_spec.shape}")
    return mixture_spec.with_data(mask.data * mixture_spec.data)


def reconstruct(mask, mixture_spec):
    return istft(apply_mask(mask, mixture_spec))
