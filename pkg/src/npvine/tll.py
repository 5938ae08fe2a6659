"""
Transformation local-likelihood kernel estimators ``tll0``, ``tll1``, ``tll2``.

Data are mapped to standard normal margins, ``Z = Phi^-1(U)``. The density
``f`` of Z is estimated by local polynomial likelihood of degree q with a
Gaussian product kernel, and the copula density follows from::

    c(u1, u2) = f(Phi^-1(u1), Phi^-1(u2)) / (phi(Phi^-1(u1)) phi(Phi^-1(u2)))

The estimate is tabulated on a 50 x 50 lattice covering [0.001, 0.999]^2,
scaled to uniform margins, and evaluated by bilinear interpolation. Queries
outside the lattice take the value at the nearest lattice point.

With a Gaussian kernel the local likelihood has a closed-form maximizer: the
fitted local model is a Gaussian tilt of the kernel whose mean and covariance
match the kernel-weighted mean and covariance of ``Z_i - z``.
"""
from functools import cached_property

from math import comb

import numpy as np
from scipy import linalg, special

from .core import clip_unit
from .pair import PairCopula

GRID_SIZE = 50
GRID_LO = 0.001
GRID_HI = 0.999
NU = {0: 1.25, 1: 5.0, 2: 5.0}
LOG_2PI = np.log(2.0 * np.pi)
CHUNK = 256


def make_grid(m=GRID_SIZE, lo=GRID_LO, hi=GRID_HI):
    """Copula-scale lattice ``Phi(z)`` for z equispaced over
    ``[Phi^-1(lo), Phi^-1(hi)]``."""
    z = np.linspace(special.ndtri(lo), special.ndtri(hi), m)
    return special.ndtr(z), z


def _sqrtm_sym(S):
    w, V = linalg.eigh(S)
    return (V * np.sqrt(w)) @ V.T


def rot_bandwidth(z, q):
    """Rule-of-thumb bandwidth ``nu_q n^(-1/(4 q* + 2)) Sigma^(1/2)`` with
    ``q* = 1 + floor(q / 2)``.

    Raises ``ValueError`` for a singular empirical covariance.
    """
    if q not in NU:
        raise ValueError("q must be 0, 1 or 2")
    z = np.asarray(z, dtype=float)
    n = z.shape[0]
    S = np.cov(z, rowvar=False)
    w = linalg.eigvalsh(S)
    if not np.all(np.isfinite(w)) or w[0] <= 1e-10 * max(w[-1], 1e-300):
        raise ValueError("empirical covariance of the normal scores is singular")
    qstar = 1 + q // 2
    return NU[q] * n ** (-1.0 / (4 * qstar + 2)) * _sqrtm_sym(S)


def _log_kernel_weights(points, z, L):
    # log K(B^-1 (x - Z_i)) for the standard bivariate Gaussian kernel, with
    # the Mahalanobis form expanded in whitened coordinates (L L^T = S^-1)
    yp, yz = points @ L, z @ L
    quad = (np.sum(yp * yp, axis=1)[:, None] + np.sum(yz * yz, axis=1)[None, :]
            - 2.0 * (yp @ yz.T))
    return -0.5 * np.maximum(quad, 0.0) - LOG_2PI


def local_poly_density(z, q, B, points):
    """Local polynomial likelihood density estimate of degree q.

    Parameters
    ----------
    z : ndarray, shape (n, 2)
        Sample on the normal scale.
    q : {0, 1, 2}
    B : ndarray, shape (2, 2)
        Bandwidth matrix.
    points : ndarray, shape (p, 2)

    Returns
    -------
    dens : ndarray, shape (p,)
    fallback : ndarray of bool, shape (p,)
        True where the degree-2 fit had a degenerate local covariance and the
        local-constant value was used instead.
    """
    z = np.asarray(z, dtype=float)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = z.shape[0]
    S = B @ B.T
    Sinv = linalg.inv(S)
    L = linalg.cholesky(Sinv, lower=True)
    logdetB = np.log(abs(linalg.det(B)))
    # centring keeps the expanded second moments well conditioned
    centre = z.mean(axis=0)
    z = z - centre
    points = points - centre
    zz = np.column_stack([z[:, 0] ** 2, z[:, 0] * z[:, 1], z[:, 1] ** 2])
    out = np.empty(points.shape[0])
    fallback = np.zeros(points.shape[0], dtype=bool)
    for start in range(0, points.shape[0], CHUNK):
        sl = slice(start, start + CHUNK)
        lw = _log_kernel_weights(points[sl], z, L)
        lmax = lw.max(axis=1)
        w = np.exp(lw - lmax[:, None])
        sw = w.sum(axis=1)
        logm0 = lmax + np.log(sw)
        # local constant: f = m0 / (n det B)
        log0 = logm0 - np.log(n) - logdetB
        if q == 0:
            out[sl] = np.exp(log0)
            continue
        p = w / sw[:, None]
        # mean of x - Z_i under the normalized kernel weights
        m = p @ z
        mu = points[sl] - m
        if q == 1:
            quad = np.einsum("pi,ij,pj->p", mu, Sinv, mu)
            out[sl] = np.exp(log0 - 0.5 * quad)
            continue
        s2 = p @ zz
        v00 = s2[:, 0] - m[:, 0] ** 2
        v01 = s2[:, 1] - m[:, 0] * m[:, 1]
        v11 = s2[:, 2] - m[:, 1] ** 2
        det = v00 * v11 - v01 * v01
        ok = (det > 1e-12 * linalg.det(S)) & (v00 > 0)
        safe = np.where(ok, det, 1.0)
        quad = (v11 * mu[:, 0] ** 2 - 2.0 * v01 * mu[:, 0] * mu[:, 1]
                + v00 * mu[:, 1] ** 2) / safe
        log2 = logm0 - np.log(n) - 0.5 * np.log(safe) - 0.5 * quad
        out[sl] = np.exp(np.where(ok, log2, log0))
        fallback[sl] = ~ok
    return out, fallback


def _exponents(q):
    return [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)][:(1, 3, 6)[q]]


def local_influence(z, q, B):
    """Weight the local fit at each ``Z_i`` puts on observation i itself.

    ``K(0) (M_i^-1)_11`` with ``M_i`` the kernel-weighted moment matrix of
    the local polynomial features at ``Z_i``. The entries of ``M_i`` are
    weighted moments of ``s = B^-1 (Z_j - Z_i)``, assembled by binomial
    expansion from raw weighted moments of the whitened sample.
    """
    z = np.asarray(z, dtype=float)
    n = z.shape[0]
    y = (z - z.mean(axis=0)) @ linalg.inv(B).T
    ex = _exponents(q)
    k = len(ex)
    need = sorted({(a0 + b0, a1 + b1) for a0, a1 in ex for b0, b1 in ex})
    raw = sorted({(c0, c1) for g0, g1 in need for c0 in range(g0 + 1) for c1 in range(g1 + 1)})
    col = {r: i for i, r in enumerate(raw)}
    Y = np.column_stack([y[:, 0] ** r0 * y[:, 1] ** r1 for r0, r1 in raw])
    sq = np.sum(y * y, axis=1)
    out = np.empty(n)
    for start in range(0, n, CHUNK):
        sl = slice(start, start + CHUNK)
        yi = y[sl]
        # kernel relative to K(0)
        w = np.exp(-0.5 * np.maximum(sq[sl, None] + sq[None, :] - 2.0 * (yi @ y.T), 0.0))
        R = w @ Y
        mom = {}
        for g0, g1 in need:
            acc = np.zeros(yi.shape[0])
            for c0 in range(g0 + 1):
                for c1 in range(g1 + 1):
                    coef = comb(g0, c0) * comb(g1, c1) * (-1.0) ** (g0 - c0 + g1 - c1)
                    acc += coef * yi[:, 0] ** (g0 - c0) * yi[:, 1] ** (g1 - c1) * R[:, col[(c0, c1)]]
            mom[(g0, g1)] = acc
        M = np.empty((yi.shape[0], k, k))
        for i, (a0, a1) in enumerate(ex):
            for j, (b0, b1) in enumerate(ex):
                M[:, i, j] = mom[(a0 + b0, a1 + b1)]
        M = M + 1e-10 * np.eye(k)
        e1 = np.zeros(k)
        e1[0] = 1.0
        out[sl] = np.linalg.solve(M, np.broadcast_to(e1, (M.shape[0], k))[..., None])[:, 0, 0]
    return out


def _trapezoid_weights(x):
    """Weights integrating the piecewise-linear interpolant on [0, 1] that is
    held constant beyond the end nodes."""
    w = np.zeros_like(x)
    dx = np.diff(x)
    w[:-1] += 0.5 * dx
    w[1:] += 0.5 * dx
    w[0] += x[0]
    w[-1] += 1.0 - x[-1]
    return w


def normalize_margins(C, weights, tol=1e-12, max_sweeps=1000):
    """Alternately rescale rows and columns of the lattice values until both
    quadrature margins equal one.

    Returns the scaled matrix and the two accumulated scaling vectors.
    """
    r = np.ones(C.shape[0])
    c = np.ones(C.shape[1])
    A = C.copy()
    for _ in range(max_sweeps):
        m1 = A @ weights
        A /= m1[:, None]
        r /= m1
        m2 = weights @ A
        A /= m2[None, :]
        c /= m2
        if max(np.max(np.abs(A @ weights - 1.0)), np.max(np.abs(m2 - 1.0))) < tol:
            break
    return A, r, c


def _locate(grid, x):
    """Cell index and interpolation fraction, clamped to the lattice hull."""
    x = np.clip(x, grid[0], grid[-1])
    i = np.clip(np.searchsorted(grid, x, side="right") - 1, 0, grid.size - 2)
    a = (x - grid[i]) / (grid[i + 1] - grid[i])
    return i, np.clip(a, 0.0, 1.0)


class TllCopula(PairCopula):
    """Lattice representation of a transformation local-likelihood estimate."""

    def __init__(self, q, B, grid, values, margin_corrections=None, loglik=0.0,
                 nobs=0, data=None, fallbacks=0, edf=None):
        self.q = int(q)
        self.estimator = f"tll{self.q}"
        self.B = np.asarray(B, dtype=float)
        self.grid = np.asarray(grid, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.margin_corrections = margin_corrections
        self.loglik = float(loglik)
        self.nobs = int(nobs)
        self.fallbacks = int(fallbacks)
        self._z = data
        self._edf = edf
        self._w = _trapezoid_weights(self.grid)
        # cumulative integrals of each column along the first axis
        dx = np.diff(self.grid)
        seg = 0.5 * (self.values[1:] + self.values[:-1]) * dx[:, None]
        self._cum = np.vstack([self.values[:1] * self.grid[0],
                               self.values[:1] * self.grid[0] + np.cumsum(seg, axis=0)])
        self._tot = self._cum[-1] + self.values[-1] * (1.0 - self.grid[-1])

    @cached_property
    def edf(self):
        if self._edf is not None:
            return float(self._edf)
        if self._z is None:
            raise ValueError("effective degrees of freedom need the fitting data")
        return float(np.sum(local_influence(self._z, self.q, self.B)))

    def pdf(self, u, v):
        u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
        i, a = _locate(self.grid, u.ravel())
        j, b = _locate(self.grid, v.ravel())
        C = self.values
        out = ((1 - a) * (1 - b) * C[i, j] + a * (1 - b) * C[i + 1, j]
               + (1 - a) * b * C[i, j + 1] + a * b * C[i + 1, j + 1])
        return out.reshape(u.shape)

    def _partial(self, x, cols):
        """Integral from 0 to x of the interpolant along axis 0 in column(s)."""
        g = self.grid
        C = self.values
        below = x <= g[0]
        above = x >= g[-1]
        i, a = _locate(g, x)
        h = g[i + 1] - g[i]
        y0 = C[i, cols]
        y1 = C[i + 1, cols]
        inner = self._cum[i, cols] + a * h * (y0 + 0.5 * a * (y1 - y0))
        out = np.where(below, C[0, cols] * x, inner)
        return np.where(above, self._cum[-1, cols] + C[-1, cols] * (x - g[-1]), out)

    def _h(self, x, cond, transpose):
        x, cond = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(cond, dtype=float))
        shape = x.shape
        x = np.clip(x.ravel(), 0.0, 1.0)
        cond = cond.ravel()
        fit = self._T if transpose else self
        j, b = _locate(fit.grid, cond)
        num = (1 - b) * fit._partial(x, j) + b * fit._partial(x, j + 1)
        den = (1 - b) * fit._tot[j] + b * fit._tot[j + 1]
        return np.clip(num / den, 0.0, 1.0).reshape(shape)

    @cached_property
    def _T(self):
        return TllCopula(self.q, self.B, self.grid, self.values.T, edf=0.0)

    def hfunc1(self, u, v):
        return self._h(u, v, transpose=False)

    def hfunc2(self, u, v):
        return self._h(v, u, transpose=True)

    def summary(self):
        out = super().summary()
        out["fallbacks"] = self.fallbacks
        return out

    def to_dict(self):
        return {"estimator": self.estimator, "q": self.q, "B": self.B.tolist(),
                "grid": self.grid.tolist(), "values": self.values.tolist(),
                "loglik": self.loglik, "nobs": self.nobs, "edf": self.edf,
                "fallbacks": self.fallbacks}

    @classmethod
    def from_dict(cls, d):
        return cls(d["q"], np.asarray(d["B"]), np.asarray(d["grid"]), np.asarray(d["values"]),
                   None, d.get("loglik", 0.0), d.get("nobs", 0), None, d.get("fallbacks", 0),
                   d.get("edf"))


def fit_tll(u, v, q, B=None, grid_size=GRID_SIZE):
    """Fit the transformation local-likelihood estimator of degree q.

    Parameters
    ----------
    u, v : array_like
        Copula-scale observations.
    q : {0, 1, 2}
    B : ndarray, optional
        Bandwidth matrix; the rule of thumb :func:`rot_bandwidth` by default.
    grid_size : int

    Returns
    -------
    TllCopula
    """
    u = clip_unit(np.asarray(u, dtype=float).ravel())
    v = clip_unit(np.asarray(v, dtype=float).ravel())
    if u.size != v.size:
        raise ValueError("length mismatch")
    n = u.size
    if n < 10:
        raise ValueError("fit_tll needs at least 10 observations")
    z = np.column_stack([special.ndtri(u), special.ndtri(v)])
    if B is None:
        B = rot_bandwidth(z, q)
    grid, zg = make_grid(grid_size)
    Z1, Z2 = np.meshgrid(zg, zg, indexing="ij")
    pts = np.column_stack([Z1.ravel(), Z2.ravel()])
    f, fb = local_poly_density(z, q, B, pts)
    phi = np.exp(-0.5 * zg ** 2 - 0.5 * LOG_2PI)
    raw = f.reshape(grid_size, grid_size) / np.outer(phi, phi)
    vals, r, c = normalize_margins(raw, _trapezoid_weights(grid))
    fit = TllCopula(q, B, grid, vals, (r, c), 0.0, n, z, int(fb.sum()))
    fit.loglik = float(np.sum(fit.logpdf(u, v)))
    return fit


__all__ = [
    "GRID_SIZE", "TllCopula", "fit_tll", "local_influence", "local_poly_density",
    "make_grid", "normalize_margins", "rot_bandwidth",
]
