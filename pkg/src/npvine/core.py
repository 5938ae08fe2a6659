"""
Copula-scale data handling, rank statistics and the standard normal transform.
"""
import csv

import numpy as np
from scipy import special, stats

# conditional arguments and pseudo-observations are kept away from {0, 1}
CLIP_EPS = 1e-10


def clip_unit(u):
    return np.clip(u, CLIP_EPS, 1.0 - CLIP_EPS)


def as_copula_data(data):
    """Validate an ``n x d`` array of copula-scale observations.

    Raises ``ValueError`` unless every entry lies strictly inside (0, 1) and
    the array has at least two rows and two columns.
    """
    u = np.asarray(data, dtype=float)
    if u.ndim != 2:
        raise ValueError("copula data must be a two-dimensional array")
    n, d = u.shape
    if n < 2 or d < 2:
        raise ValueError(f"need n >= 2 and d >= 2, got {u.shape}")
    if not np.all(np.isfinite(u)):
        raise ValueError("copula data contains non-finite values")
    if np.any(u <= 0.0) or np.any(u >= 1.0):
        raise ValueError("copula data must lie strictly inside (0, 1)")
    return u


def pseudo_obs(raw):
    """Map raw observations to the copula scale.

    Each column is replaced by its average ranks divided by ``n + 1``, so the
    result never touches 0 or 1.

    Parameters
    ----------
    raw : array_like, shape (n, d)

    Returns
    -------
    ndarray, shape (n, d)
    """
    x = np.asarray(raw, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValueError("raw data must be one- or two-dimensional")
    n = x.shape[0]
    if n < 2:
        raise ValueError("need at least two observations")
    if not np.all(np.isfinite(x)):
        raise ValueError("raw data contains non-finite values")
    return stats.rankdata(x, method="average", axis=0) / (n + 1.0)


def _paired(u, v):
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    if u.shape != v.shape:
        raise ValueError(f"length mismatch: {u.size} vs {v.size}")
    if u.size < 2:
        raise ValueError("need at least two observations")
    return u, v


def kendalls_tau(u, v):
    """Tie-adjusted Kendall's tau (tau-b).

    Uses scipy's O(n log n) implementation. Returns 0 when one of the inputs
    is constant (tau-b is undefined there).
    """
    u, v = _paired(u, v)
    tau = stats.kendalltau(u, v, variant="b").statistic
    if not np.isfinite(tau):
        return 0.0
    return float(np.clip(tau, -1.0, 1.0))


def spearmans_rho(u, v):
    """Spearman's rho as the Pearson correlation of average ranks."""
    u, v = _paired(u, v)
    ru = stats.rankdata(u)
    rv = stats.rankdata(v)
    ru -= ru.mean()
    rv -= rv.mean()
    denom = np.sqrt(np.dot(ru, ru) * np.dot(rv, rv))
    if denom == 0.0:
        raise ValueError("zero rank variance")
    return float(np.clip(np.dot(ru, rv) / denom, -1.0, 1.0))


def std_normal_cdf(x):
    return special.ndtr(x)


def std_normal_quantile(p):
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise ValueError("normal quantile requires p strictly inside (0, 1)")
    out = special.ndtri(p)
    return out if out.ndim else float(out)


def std_normal_pdf(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)


def read_csv_matrix(path, header=False):
    """Read a comma-separated numeric matrix (UTF-8, '.' decimal separator).

    Returns ``(data, column_names)``; names are ``None`` without a header.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    names = None
    if header:
        if not rows:
            raise ValueError(f"{path}: empty file")
        names = [c.strip() for c in rows[0]]
        rows = rows[1:]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    width = len(rows[0])
    data = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ValueError(f"{path}: row {i + 1} has {len(row)} fields, expected {width}")
        for j, cell in enumerate(row):
            try:
                data[i, j] = float(cell)
            except ValueError:
                raise ValueError(f"{path}: non-numeric cell {cell!r} at row {i + 1}") from None
    return data, names


def write_csv_matrix(path, data, names=None):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        if names is not None:
            w.writerow(names)
        for row in np.asarray(data):
            w.writerow([repr(float(x)) for x in row])
