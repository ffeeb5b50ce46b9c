"""Determined-case FastICA baseline with symmetric decorrelation.

Two contrasts are available: ``"kurtosis"`` uses g(u) = u^3 and
``"negentropy"`` the log-cosh surrogate g(u) = tanh(u).
"""
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, ParameterError, ShapeError

KURTOSIS = "kurtosis"
NEGENTROPY = "negentropy"

# mixing used to build a two-channel observation from two sources
HARNESS_MIXING = np.array([[1.0, 1.0], [0.6, 1.4]])


@dataclass(eq=False)
class IcaModel:
    mean: np.ndarray
    whitening: np.ndarray
    unmixing: np.ndarray = None
    contrast: str = None
    iterations_used: int = 0
    converged: bool = False


def _as_observations(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ShapeError(f"expected (channels >= 2, samples) observations, got {x.shape}")
    if x.shape[1] <= x.shape[0]:
        raise ShapeError("need more samples than channels")
    if not np.all(np.isfinite(x)):
        raise ParameterError("observations must be finite")
    return x


def center_whiten(x):
    """Center each channel and whiten with the inverse square root of the covariance.

    Returns the whitened data and a partial :class:`IcaModel` holding the mean
    and whitening matrix.
    """
    x = _as_observations(x)
    mean = x.mean(axis=1)
    xc = x - mean[:, None]
    cov = xc @ xc.T / xc.shape[1]
    evals, evecs = np.linalg.eigh(cov)
    if evals[0] <= 1e-10 * max(evals[-1], np.finfo(float).tiny):
        raise DegenerateInputError("channel covariance is rank deficient; channels are "
                                   "linearly dependent")
    whitening = (evecs / np.sqrt(evals)) @ evecs.T
    return whitening @ xc, IcaModel(mean, whitening)


def _sym_decorrelate(w):
    """W <- (W W^T)^(-1/2) W."""
    evals, evecs = np.linalg.eigh(w @ w.T)
    return (evecs / np.sqrt(evals)) @ evecs.T @ w


def _contrast_terms(u, contrast):
    if contrast == KURTOSIS:
        return u ** 3, (3.0 * u ** 2).mean(axis=1)
    g = np.tanh(u)
    return g, (1.0 - g ** 2).mean(axis=1)


def fastica_fit(z, contrast=NEGENTROPY, tol=1e-6, max_iter=200, seed=0, model=None):
    """Fixed-point iteration on whitened data ``z`` (channels x samples).

    Each sweep applies ``w <- E[z g(w^T z)] - E[g'(w^T z)] w`` to every row and
    then symmetrically decorrelates. Convergence is declared when
    ``max_i (1 - |<w_new_i, w_old_i>|) < tol``; running out of iterations
    returns a model with ``converged=False``.
    """
    if contrast not in (KURTOSIS, NEGENTROPY):
        raise ParameterError(f"unknown contrast {contrast!r}")
    z = np.asarray(z, dtype=np.float64)
    m, n = z.shape
    rng = np.random.default_rng(seed)
    w = _sym_decorrelate(rng.standard_normal((m, m)))
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        g, g_prime_mean = _contrast_terms(w @ z, contrast)
        w_new = _sym_decorrelate(g @ z.T / n - g_prime_mean[:, None] * w)
        change = float(np.max(1.0 - np.abs(np.einsum("ij,ij->i", w_new, w))))
        w = w_new
        if change < tol:
            converged = True
            break
    if model is None:
        model = IcaModel(np.zeros(m), np.eye(m))
    return IcaModel(model.mean, model.whitening, w, contrast, iterations, converged)


def fit(x, contrast=NEGENTROPY, tol=1e-6, max_iter=200, seed=0):
    z, partial = center_whiten(x)
    return fastica_fit(z, contrast, tol, max_iter, seed, partial)


def ica_separate(x, model):
    """Unmix observations with a fitted model; rows come out with unit variance."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != model.mean.shape[0]:
        raise ShapeError(f"model expects {model.mean.shape[0]} channels, got array of "
                         f"shape {x.shape}")
    return model.unmixing @ model.whitening @ (x - model.mean[:, None])
