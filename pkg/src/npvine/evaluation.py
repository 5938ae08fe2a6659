"""
Accuracy measures, out-of-sample likelihood, rank aggregation and timing.

The divergence measures are Monte Carlo integrals with importance sample
drawn from the true density c, so that for ``U_i ~ c``::

    IAE       = mean |c_hat(U_i) - c(U_i)| / c(U_i)
    Hellinger = sqrt(mean (sqrt c_hat(U_i) - sqrt c(U_i))^2 / (2 c(U_i)))
    KL        = mean log(c(U_i) / c_hat(U_i))
"""
import csv
import time
import warnings
from dataclasses import astuple, dataclass, fields

import numpy as np
from scipy import stats

from .pair import PDF_FLOOR

STRUCTURE_MODES = ("true", "tau", "caic")
DEFAULT_N = 1000


@dataclass
class AccuracyRecord:
    scenario: str
    estimator: str
    structure_mode: str
    rep: int
    iae: float
    hellinger: float
    kl: float
    fit_seconds: float
    eval_seconds: float

    @classmethod
    def header(cls):
        return [f.name for f in fields(cls)]

    def row(self):
        return [v if isinstance(v, str) else repr(float(v)) if isinstance(v, float) else str(int(v))
                for v in astuple(self)]

    def sort_key(self):
        return (self.scenario, self.estimator, self.structure_mode, self.rep)


def write_records(path, records):
    """Write records sorted by (scenario, estimator, structure_mode, rep)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AccuracyRecord.header())
        for r in sorted(records, key=AccuracyRecord.sort_key):
            w.writerow(r.row())


def read_records(path):
    """Parse a results CSV; raises ``ValueError`` on malformed content."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            head = next(reader)
        except StopIteration:
            raise ValueError("results file is empty") from None
        if head != AccuracyRecord.header():
            raise ValueError(f"unexpected results header {head}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(head):
                raise ValueError(f"line {lineno}: expected {len(head)} fields")
            try:
                out.append(AccuracyRecord(row[0], row[1], row[2], int(row[3]),
                                          *(float(x) for x in row[4:])))
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
    return out


# --- importance-sampling measures -----------------------------------------

def _density(estimate):
    if callable(estimate):
        return estimate
    if hasattr(estimate, "pdf"):
        return estimate.pdf
    const = float(estimate)
    return lambda u: np.full(np.atleast_2d(u).shape[0], const)


def importance_sample(truth, N, rng):
    """Draw ``U_i ~ c`` from the truth and return ``(U, c(U))``."""
    if N < 1:
        raise ValueError("N must be positive")
    U = truth.sample(int(N), rng)
    return U, np.maximum(truth.pdf(U), PDF_FLOOR)


def measures_from_values(c_hat, c):
    """IAE, Hellinger and KL from density values on an importance sample."""
    c = np.maximum(np.asarray(c, dtype=float), PDF_FLOOR)
    c_hat = np.maximum(np.asarray(c_hat, dtype=float), 0.0)
    iae = float(np.mean(np.abs(c_hat - c) / c))
    hel = float(np.sqrt(np.mean((np.sqrt(c_hat) - np.sqrt(c)) ** 2 / (2.0 * c))))
    kl = float(np.mean(np.log(c) - np.log(np.maximum(c_hat, PDF_FLOOR))))
    return iae, hel, kl


def importance_measures(estimate, truth, N=DEFAULT_N, rng=None, sample=None):
    """All three measures on one shared importance sample.

    Parameters
    ----------
    estimate : callable, object with ``pdf``, or constant
        Density evaluator on rows of a d-column array.
    truth : TrueVineModel
    N : int
    rng : numpy.random.Generator
    sample : tuple, optional
        Precomputed ``(U, c(U))`` from :func:`importance_sample`.

    Returns
    -------
    dict with keys ``iae``, ``hellinger``, ``kl``
    """
    if sample is None:
        sample = importance_sample(truth, N, rng if rng is not None else np.random.default_rng())
    U, c = sample
    iae, hel, kl = measures_from_values(_density(estimate)(U), c)
    return {"iae": iae, "hellinger": hel, "kl": kl}


def iae_importance(estimate, truth, N=DEFAULT_N, rng=None):
    return importance_measures(estimate, truth, N, rng)["iae"]


def hellinger_importance(estimate, truth, N=DEFAULT_N, rng=None):
    return importance_measures(estimate, truth, N, rng)["hellinger"]


def kl_importance(estimate, truth, N=DEFAULT_N, rng=None):
    return importance_measures(estimate, truth, N, rng)["kl"]


def oos_loglik(model, test):
    """Mean log density of the model over the rows of ``test``."""
    dens = np.maximum(model.pdf(np.atleast_2d(test)), PDF_FLOOR)
    return float(np.mean(np.log(dens)))


# --- ranks ------------------------------------------------------------------

def _field(r, name):
    return r[name] if isinstance(r, dict) else getattr(r, name)


def scenario_ranks(records, measure="iae"):
    """Per-scenario average ranks of the estimators.

    Within a scenario the measure is averaged over replications and
    structure modes, then ranked with rank 1 for the smallest mean and
    average ranks for ties. Scenarios missing an estimator that appears
    elsewhere are skipped with a warning.

    Returns
    -------
    dict scenario -> dict estimator -> rank
    """
    sums = {}
    for r in records:
        val = float(_field(r, measure))
        if not np.isfinite(val):
            continue
        key = (_field(r, "scenario"), _field(r, "estimator"))
        s = sums.setdefault(key, [0.0, 0])
        s[0] += val
        s[1] += 1
    estimators = sorted({e for _, e in sums})
    scenarios = sorted({s for s, _ in sums})
    out = {}
    for sc in scenarios:
        present = [e for e in estimators if (sc, e) in sums]
        if len(present) < len(estimators):
            missing = sorted(set(estimators) - set(present))
            warnings.warn(f"scenario {sc} lacks estimators {missing}; skipped", stacklevel=2)
            continue
        means = np.array([sums[(sc, e)][0] / sums[(sc, e)][1] for e in present])
        out[sc] = dict(zip(present, stats.rankdata(means, method="average").tolist()))
    return out


def average_ranks(records, measure="iae"):
    """Mean over scenarios of each estimator's per-scenario rank."""
    per = scenario_ranks(records, measure)
    if not per:
        return {}
    ests = sorted(next(iter(per.values())))
    return {e: float(np.mean([per[s][e] for s in per])) for e in ests}


def scenario_medians(records, measure="iae"):
    """Median of the measure per (scenario, estimator)."""
    vals = {}
    for r in records:
        vals.setdefault((_field(r, "scenario"), _field(r, "estimator")), []).append(
            float(_field(r, measure)))
    return {k: float(np.nanmedian(v)) for k, v in sorted(vals.items())}


# --- timing ------------------------------------------------------------------

def timed(action, *args, **kwargs):
    """Run ``action`` and return ``(result, seconds)`` on the monotonic clock."""
    t0 = time.perf_counter()
    result = action(*args, **kwargs)
    return result, time.perf_counter() - t0


def timing_capture(action, *args, **kwargs):
    """Wall-clock seconds taken by ``action(*args, **kwargs)``."""
    return timed(action, *args, **kwargs)[1]


__all__ = [
    "AccuracyRecord", "STRUCTURE_MODES", "average_ranks", "hellinger_importance",
    "iae_importance", "importance_measures", "importance_sample", "kl_importance",
    "measures_from_values", "oos_loglik", "read_records", "scenario_medians",
    "scenario_ranks", "timed", "timing_capture", "write_records",
]
