"""Gain-allowed BSS Eval: orthogonal decomposition of an estimate and SDR/SIR/SAR.

An estimate is split into the part explained by its own reference (any scalar
gain allowed), the part explained by the other references, and the remainder.
No distortion filters and no framing are used. There is no noise reference,
so the noise term is identically zero.
"""
import csv
import io
import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .audio import AudioSignal
from .errors import DegenerateReferencesError, ShapeError, UndefinedMetricError

REPORT_COLUMNS = ("method", "source", "sdr_db", "sir_db", "sar_db", "permutation")
# components with less energy than this fraction of the estimate's are projection
# roundoff (about -240 dB) and are set to exactly zero
ROUNDOFF_FLOOR = 1e-24


@dataclass(eq=False)
class Decomposition:
    s_target: np.ndarray
    e_interf: np.ndarray
    e_artif: np.ndarray
    e_noise: np.ndarray

    def total(self):
        return self.s_target + self.e_interf + self.e_noise + self.e_artif


@dataclass(eq=False)
class BssEvalResult:
    """Metrics per estimate; ``permutation[i]`` is the reference matched to estimate ``i``."""

    sdr_db: np.ndarray
    sir_db: np.ndarray
    sar_db: np.ndarray
    permutation: tuple


def _samples(x):
    return x.samples if isinstance(x, AudioSignal) else np.asarray(x, dtype=np.float64)


def _reference_matrix(references):
    refs = [_samples(r) for r in references]
    if not refs:
        raise ShapeError("need at least one reference")
    rates = {r.sample_rate_hz for r in references if isinstance(r, AudioSignal)}
    if len(rates) > 1:
        raise ShapeError(f"references have different sample rates {sorted(rates)}")
    if len({r.shape for r in refs}) != 1 or refs[0].ndim != 1:
        raise ShapeError("references must be 1-D and of equal length")
    return np.vstack(refs)


def _gram_solver(refs):
    gram = refs @ refs.T
    scale = np.max(np.diag(gram))
    if scale == 0.0:
        raise DegenerateReferencesError("all references are silent")
    evals = np.linalg.eigvalsh(gram / scale)
    if evals[0] <= 1e-12:
        raise DegenerateReferencesError("references are linearly dependent")
    return gram


def decompose(estimate, target_index, references):
    """Split ``estimate`` into target, interference and artifact components."""
    refs = _reference_matrix(references)
    est = _samples(estimate)
    if est.shape != refs.shape[1:]:
        raise ShapeError(f"estimate length {est.shape} differs from references {refs.shape[1:]}")
    if isinstance(estimate, AudioSignal) and isinstance(references[0], AudioSignal) \
            and estimate.sample_rate_hz != references[0].sample_rate_hz:
        raise ShapeError("estimate and references have different sample rates")
    gram = _gram_solver(refs)
    corr = refs @ est

    s_j = refs[target_index]
    s_target = (corr[target_index] / gram[target_index, target_index]) * s_j
    coeffs = np.linalg.solve(gram, corr)
    p_all = coeffs @ refs
    parts = [s_target, p_all - s_target, est - p_all]
    floor = ROUNDOFF_FLOOR * float(np.dot(est, est))
    parts = [np.zeros_like(est) if float(np.dot(c, c)) <= floor else c for c in parts]
    return Decomposition(*parts, np.zeros_like(est))


def _db(num, den):
    if den == 0.0:
        return math.inf if num > 0.0 else math.nan
    if num == 0.0:
        return -math.inf
    return 10.0 * math.log10(num / den)


def ratios(d):
    """Return ``(sdr_db, sir_db, sar_db)``; a zero error energy gives ``inf``."""
    target = float(np.dot(d.s_target, d.s_target))
    interf = float(np.dot(d.e_interf, d.e_interf))
    distortion = d.e_interf + d.e_noise + d.e_artif
    dist = float(np.dot(distortion, distortion))
    if target == 0.0 and dist == 0.0:
        raise UndefinedMetricError("estimate is silent; SDR/SIR/SAR are undefined")
    projected = d.s_target + d.e_interf + d.e_noise
    artif = float(np.dot(d.e_artif, d.e_artif))
    return (_db(target, dist), _db(target, interf),
            _db(float(np.dot(projected, projected)), artif))


def evaluate(estimates, references):
    """Score every estimate against every reference and keep the assignment with
    the highest mean SIR (first in lexicographic order on ties)."""
    if len(estimates) != len(references):
        raise ShapeError(f"{len(estimates)} estimates vs {len(references)} references")
    k = len(estimates)
    table = np.empty((k, k, 3))
    for i, est in enumerate(estimates):
        for j in range(k):
            table[i, j] = ratios(decompose(est, j, references))

    def score(perm):
        sirs = np.array([table[i, j, 1] for i, j in enumerate(perm)])
        # an undefined or -inf SIR disqualifies the assignment
        if np.any(np.isnan(sirs) | (sirs == -np.inf)):
            return -np.inf
        return float(np.mean(sirs))

    best = max(itertools.permutations(range(k)), key=score)
    picked = np.array([table[i, j] for i, j in enumerate(best)])
    return BssEvalResult(picked[:, 0], picked[:, 1], picked[:, 2], tuple(best))


def format_db(value):
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return float(value)


def report_rows(method, result, source_names=None):
    names = source_names or [f"source{i}" for i in range(len(result.permutation))]
    return [
        {
            "method": method,
            "source": names[i],
            "sdr_db": format_db(result.sdr_db[i]),
            "sir_db": format_db(result.sir_db[i]),
            "sar_db": format_db(result.sar_db[i]),
            "permutation": int(result.permutation[i]),
        }
        for i in range(len(result.permutation))
    ]


def rows_to_csv(rows):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({key: _csv_value(row[key]) for key in REPORT_COLUMNS})
    return buf.getvalue()


def _csv_value(value):
    return f"{value:.6f}" if isinstance(value, float) else value


def rows_to_json(rows, info=None):
    doc = {"columns": list(REPORT_COLUMNS), "rows": rows}
    if info:
        doc["info"] = info
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"
