"""
Common interface of fitted bivariate (pair-)copula densities.
"""
from abc import ABC, abstractmethod

import numpy as np

from .core import CLIP_EPS

PDF_FLOOR = 1e-300


def caic(loglik, edf, n):
    """Corrected AIC, ``-2 loglik + 2 df + 2 df (df + 1) / (n - df - 1)``.

    Returns ``+inf`` when ``n <= df + 1`` so that such a fit is never
    preferred.
    """
    if n <= edf + 1:
        return np.inf
    return -2.0 * loglik + 2.0 * edf + 2.0 * edf * (edf + 1.0) / (n - edf - 1.0)


def _bisect_inverse(fun, p, cond, iters=64):
    """Invert ``fun(x, cond)`` (nondecreasing in x on [0, 1]) at level p."""
    p = np.asarray(p, dtype=float)
    cond = np.broadcast_to(np.asarray(cond, dtype=float), p.shape)
    lo = np.zeros(p.shape)
    hi = np.ones(p.shape)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = fun(mid, cond) < p
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return np.clip(0.5 * (lo + hi), CLIP_EPS, 1.0 - CLIP_EPS)


class PairCopula(ABC):
    """A fitted bivariate copula density.

    Subclasses provide the density and both h-functions::

        hfunc1(u, v) = P(U1 <= u | U2 = v)
        hfunc2(u, v) = P(U2 <= v | U1 = u)

    together with the in-sample log-likelihood ``loglik``, the effective
    degrees of freedom ``edf`` and the sample size ``nobs``.
    """

    estimator = "abstract"
    nobs = 0
    loglik = 0.0

    @abstractmethod
    def pdf(self, u, v):
        ...

    def logpdf(self, u, v):
        return np.log(np.maximum(self.pdf(u, v), PDF_FLOOR))

    @abstractmethod
    def hfunc1(self, u, v):
        ...

    @abstractmethod
    def hfunc2(self, u, v):
        ...

    def hinv1(self, p, v):
        """Solve ``hfunc1(u, v) = p`` for u."""
        return _bisect_inverse(self.hfunc1, p, v)

    def hinv2(self, p, u):
        """Solve ``hfunc2(u, v) = p`` for v."""
        return _bisect_inverse(lambda x, c: self.hfunc2(c, x), p, u)

    @property
    @abstractmethod
    def edf(self):
        ...

    @property
    def caic(self):
        return caic(self.loglik, self.edf, self.nobs)

    def summary(self):
        return {"estimator": self.estimator, "loglik": float(self.loglik),
                "edf": float(self.edf), "nobs": int(self.nobs)}

    @abstractmethod
    def to_dict(self):
        ...
