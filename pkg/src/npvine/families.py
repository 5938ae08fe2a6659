"""
Parametric bivariate copula families.

Independence, Gaussian, Student t, Clayton, Gumbel and Frank copulas with
densities, h-functions, inverse h-functions, Kendall's tau maps, sampling and
an AIC-selecting estimator (``par``).

Rotations follow the usual convention: the density of a copula rotated by
90 degrees is ``c(1 - u, v)``, by 180 degrees ``c(1 - u, 1 - v)`` and by 270
degrees ``c(u, 1 - v)``. Only Clayton and Gumbel are rotated.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize, special

from .core import CLIP_EPS, clip_unit, kendalls_tau
from .pair import PairCopula

FAMILIES = ("Independence", "Gaussian", "StudentT", "Clayton", "Gumbel", "Frank")
ROTATABLE = ("Clayton", "Gumbel")
ROTATIONS = (0, 90, 180, 270)
STUDENT_DF_GRID = tuple(range(3, 31))

_BOUNDS = {
    "Gaussian": (-0.9999, 0.9999),
    "StudentT": (-0.9999, 0.9999),
    "Clayton": (1e-4, 50.0),
    "Gumbel": (1.0, 30.0),
    "Frank": (-50.0, 50.0),
}


@dataclass(frozen=True)
class FamilySpec:
    family: str
    rotation: int = 0
    theta: float = 0.0
    df: float | None = None

    def __post_init__(self):
        fam = self.family
        if fam not in FAMILIES:
            raise ValueError(f"unknown family {fam!r}")
        if self.rotation not in ROTATIONS:
            raise ValueError(f"rotation must be one of {ROTATIONS}")
        if self.rotation and fam not in ROTATABLE:
            raise ValueError(f"{fam} copulas are not rotated")
        t = self.theta
        if not np.isfinite(t):
            raise ValueError("parameter must be finite")
        if fam in ("Gaussian", "StudentT") and not -1.0 < t < 1.0:
            raise ValueError(f"{fam} parameter must lie in (-1, 1), got {t}")
        if fam == "Clayton" and not t > 0.0:
            raise ValueError(f"Clayton parameter must be positive, got {t}")
        if fam == "Gumbel" and not t >= 1.0:
            raise ValueError(f"Gumbel parameter must be >= 1, got {t}")
        if fam == "Frank" and t == 0.0:
            raise ValueError("Frank parameter must be nonzero")
        if fam == "StudentT":
            if self.df is None or not self.df > 2.0:
                raise ValueError("StudentT needs df > 2")
        elif self.df is not None:
            raise ValueError(f"{fam} takes no df")

    @property
    def nparams(self):
        return {"Independence": 0, "StudentT": 2}.get(self.family, 1)

    def to_dict(self):
        return {"family": self.family, "rotation": self.rotation,
                "theta": float(self.theta), "df": None if self.df is None else float(self.df)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["family"], int(d.get("rotation", 0)), float(d.get("theta", 0.0)), d.get("df"))


INDEPENDENCE = FamilySpec("Independence")


# --- unrotated families ----------------------------------------------------
# _base_h(u, v) = P(U <= u | V = v); all base families are exchangeable.

def _clayton_logA(theta, lu, lv):
    # log(u^-theta + v^-theta - 1); the log1p form keeps A - 1 = O(theta)
    # accurate for small theta, the log-sum-exp form avoids overflow
    la = -theta * lu
    lb = -theta * lv
    lse = np.logaddexp(la, lb)
    big = lse + np.log1p(-np.exp(-lse))
    small = np.log1p(np.expm1(np.minimum(la, 30.0)) + np.expm1(np.minimum(lb, 30.0)))
    return np.where(np.maximum(la, lb) < 30.0, small, big)


def _gumbel_parts(theta, u, v):
    x = -np.log(u)
    y = -np.log(v)
    lx, ly = np.log(x), np.log(y)
    lA = np.logaddexp(theta * lx, theta * ly)
    w = np.exp(lA / theta)
    return x, y, lx, ly, lA, w


# Frank with theta < 0 is the reflection u -> 1 - u of Frank with -theta; the
# helpers below assume theta > 0 and avoid the cancellation in
# (e^-theta - 1) + (e^-theta*u - 1)(e^-theta*v - 1) for large theta.

def _frank_logneg_denom(theta, u, v):
    # log of e^(-theta u)(1 - e^(-theta v)) + e^(-theta v)(1 - e^(-theta (1 - v)))
    t1 = -theta * u + np.log(-np.expm1(-theta * v))
    t2 = -theta * v + np.log(-np.expm1(-theta * (1.0 - v)))
    return np.logaddexp(t1, t2)


def _frank_logpdf(theta, u, v):
    return (np.log(theta) + np.log(-np.expm1(-theta)) - theta * (u + v)
            - 2.0 * _frank_logneg_denom(theta, u, v))


def _frank_h(theta, u, v):
    lh = -theta * v + np.log(-np.expm1(-theta * u)) - _frank_logneg_denom(theta, u, v)
    return np.exp(np.minimum(lh, 0.0))


def _frank_hinv(theta, p, v):
    den = np.logaddexp(-theta * v + np.log1p(-p), np.log(p))
    if theta < 1.0:
        # difference of the two logs is O(theta); keep it in log1p form
        return -np.log1p(p * np.expm1(-theta) * np.exp(-den)) / theta
    num = np.logaddexp(-theta * v + np.log1p(-p), np.log(p) - theta)
    return -(num - den) / theta


def _base_logpdf(fam, theta, df, u, v):
    if fam == "Independence":
        return np.zeros(np.broadcast(u, v).shape)
    if fam == "Gaussian":
        x, y = special.ndtri(u), special.ndtri(v)
        r2 = 1.0 - theta * theta
        return -0.5 * np.log(r2) - (theta * theta * (x * x + y * y) - 2.0 * theta * x * y) / (2.0 * r2)
    if fam == "StudentT":
        x, y = special.stdtrit(df, u), special.stdtrit(df, v)
        return _t_logpdf_xy(theta, df, x, y)
    if fam == "Clayton":
        lu, lv = np.log(u), np.log(v)
        return (np.log1p(theta) - (1.0 + theta) * (lu + lv)
                - (2.0 + 1.0 / theta) * _clayton_logA(theta, lu, lv))
    if fam == "Gumbel":
        x, y, lx, ly, lA, w = _gumbel_parts(theta, u, v)
        return (-w + (theta - 1.0) * (lx + ly) + x + y
                + (2.0 / theta - 2.0) * lA + np.log1p((theta - 1.0) / w))
    if fam == "Frank":
        if theta < 0:
            return _frank_logpdf(-theta, 1.0 - u, v)
        return _frank_logpdf(theta, u, v)
    raise ValueError(fam)


def _t_logpdf_xy(rho, df, x, y):
    r2 = 1.0 - rho * rho
    const = (special.gammaln((df + 2.0) / 2.0) + special.gammaln(df / 2.0)
             - 2.0 * special.gammaln((df + 1.0) / 2.0) - 0.5 * np.log(r2))
    q = (x * x + y * y - 2.0 * rho * x * y) / (df * r2)
    return (const - (df + 2.0) / 2.0 * np.log1p(q)
            + (df + 1.0) / 2.0 * (np.log1p(x * x / df) + np.log1p(y * y / df)))


def _base_h(fam, theta, df, u, v):
    if fam == "Independence":
        return np.broadcast_to(u, np.broadcast(u, v).shape).astype(float)
    if fam == "Gaussian":
        x, y = special.ndtri(u), special.ndtri(v)
        return special.ndtr((x - theta * y) / np.sqrt(1.0 - theta * theta))
    if fam == "StudentT":
        x, y = special.stdtrit(df, u), special.stdtrit(df, v)
        s = np.sqrt((df + y * y) * (1.0 - theta * theta) / (df + 1.0))
        return special.stdtr(df + 1.0, (x - theta * y) / s)
    if fam == "Clayton":
        lu, lv = np.log(u), np.log(v)
        lh = -(theta + 1.0) * lv - (1.0 + 1.0 / theta) * _clayton_logA(theta, lu, lv)
        return np.exp(np.minimum(lh, 0.0))
    if fam == "Gumbel":
        x, y, lx, ly, lA, w = _gumbel_parts(theta, u, v)
        lh = -w + (1.0 / theta - 1.0) * lA + (theta - 1.0) * ly + y
        return np.exp(np.minimum(lh, 0.0))
    if fam == "Frank":
        if theta < 0:
            return 1.0 - _frank_h(-theta, 1.0 - u, v)
        return _frank_h(theta, u, v)
    raise ValueError(fam)


def _base_hinv(fam, theta, df, p, v):
    if fam == "Independence":
        return np.broadcast_to(p, np.broadcast(p, v).shape).astype(float)
    if fam == "Gaussian":
        y = special.ndtri(v)
        return special.ndtr(special.ndtri(p) * np.sqrt(1.0 - theta * theta) + theta * y)
    if fam == "StudentT":
        y = special.stdtrit(df, v)
        s = np.sqrt((df + y * y) * (1.0 - theta * theta) / (df + 1.0))
        return special.stdtr(df, special.stdtrit(df + 1.0, p) * s + theta * y)
    if fam == "Clayton":
        lv = np.log(v)
        # u = (1 + v^-theta (p^(-theta/(1+theta)) - 1))^(-1/theta)
        e = np.expm1(-theta / (1.0 + theta) * np.log(p))
        with np.errstate(divide="ignore"):
            lt = np.logaddexp(0.0, -theta * lv + np.log(e))
        return np.exp(-lt / theta)
    if fam == "Gumbel":
        return _gumbel_hinv(theta, p, v)
    if fam == "Frank":
        if theta < 0:
            return 1.0 - _frank_hinv(-theta, 1.0 - p, v)
        return _frank_hinv(theta, p, v)
    raise ValueError(fam)


def _gumbel_hinv(theta, p, v, iters=64):
    p, v = np.broadcast_arrays(np.asarray(p, dtype=float), np.asarray(v, dtype=float))
    lo = np.full(p.shape, -40.0)
    hi = np.full(p.shape, 40.0)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = _base_h("Gumbel", theta, None, special.expit(mid), v) < p
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    u = special.expit(0.5 * (lo + hi))
    ulo, uhi = special.expit(lo), special.expit(hi)
    for _ in range(2):
        dens = np.exp(_base_logpdf("Gumbel", theta, None, u, v))
        step = (_base_h("Gumbel", theta, None, u, v) - p) / np.maximum(dens, 1e-300)
        cand = u - step
        u = np.where((cand > ulo) & (cand < uhi), cand, u)
    return u


# --- rotated evaluation ------------------------------------------------------

def _prep(u, v):
    u = clip_unit(np.asarray(u, dtype=float))
    v = clip_unit(np.asarray(v, dtype=float))
    return np.broadcast_arrays(u, v)


def logpdf(spec, u, v):
    u, v = _prep(u, v)
    r = spec.rotation
    if r in (90, 180):
        u = 1.0 - u
    if r in (180, 270):
        v = 1.0 - v
    return _base_logpdf(spec.family, spec.theta, spec.df, u, v)


def pdf(spec, u, v):
    """Copula density of ``spec`` at (u, v)."""
    return np.exp(logpdf(spec, u, v))


def hfunc(spec, u, cond):
    """``h(u | cond) = P(U1 <= u | U2 = cond)``, the partial integral of the
    density in its first argument."""
    return hfunc1(spec, u, cond)


def hfunc1(spec, u, v):
    u, v = _prep(u, v)
    f, t, df, r = spec.family, spec.theta, spec.df, spec.rotation
    if r == 0:
        return _base_h(f, t, df, u, v)
    if r == 90:
        return 1.0 - _base_h(f, t, df, 1.0 - u, v)
    if r == 180:
        return 1.0 - _base_h(f, t, df, 1.0 - u, 1.0 - v)
    return _base_h(f, t, df, u, 1.0 - v)


def hfunc2(spec, u, v):
    """``P(U2 <= v | U1 = u)``."""
    u, v = _prep(u, v)
    f, t, df, r = spec.family, spec.theta, spec.df, spec.rotation
    if r == 0:
        return _base_h(f, t, df, v, u)
    if r == 90:
        return _base_h(f, t, df, v, 1.0 - u)
    if r == 180:
        return 1.0 - _base_h(f, t, df, 1.0 - v, 1.0 - u)
    return 1.0 - _base_h(f, t, df, 1.0 - v, u)


def hinv(spec, p, cond):
    """Inverse of :func:`hfunc` in its first argument."""
    return hinv1(spec, p, cond)


def hinv1(spec, p, v):
    p, v = _prep(p, v)
    f, t, df, r = spec.family, spec.theta, spec.df, spec.rotation
    if r == 0:
        out = _base_hinv(f, t, df, p, v)
    elif r == 90:
        out = 1.0 - _base_hinv(f, t, df, 1.0 - p, v)
    elif r == 180:
        out = 1.0 - _base_hinv(f, t, df, 1.0 - p, 1.0 - v)
    else:
        out = _base_hinv(f, t, df, p, 1.0 - v)
    return clip_unit(out)


def hinv2(spec, p, u):
    """Solve ``hfunc2(spec, u, v) = p`` for v."""
    p, u = _prep(p, u)
    f, t, df, r = spec.family, spec.theta, spec.df, spec.rotation
    if r == 0:
        out = _base_hinv(f, t, df, p, u)
    elif r == 90:
        out = _base_hinv(f, t, df, p, 1.0 - u)
    elif r == 180:
        out = 1.0 - _base_hinv(f, t, df, 1.0 - p, 1.0 - u)
    else:
        out = 1.0 - _base_hinv(f, t, df, 1.0 - p, u)
    return clip_unit(out)


# --- Kendall's tau ---------------------------------------------------------

def _debye1(theta):
    if theta == 0.0:
        return 1.0
    val = integrate.quad(lambda t: t / np.expm1(t) if t != 0.0 else 1.0, 0.0, theta,
                         epsabs=1e-14, epsrel=1e-13)[0]
    return val / theta


def frank_tau(theta):
    if abs(theta) < 1e-2:
        # series expansion; the integral form cancels badly near zero
        return theta / 9.0 - theta ** 3 / 900.0 + theta ** 5 / 52920.0
    return 1.0 - 4.0 / theta * (1.0 - _debye1(theta))


def param_to_tau(spec):
    """Kendall's tau implied by a family specification."""
    f, t = spec.family, spec.theta
    if f == "Independence":
        tau = 0.0
    elif f in ("Gaussian", "StudentT"):
        tau = 2.0 / np.pi * np.arcsin(t)
    elif f == "Clayton":
        tau = t / (t + 2.0)
    elif f == "Gumbel":
        tau = 1.0 - 1.0 / t
    else:
        tau = frank_tau(t)
    if spec.rotation in (90, 270):
        tau = -tau
    return float(tau)


@lru_cache(maxsize=4096)
def _frank_theta(tau):
    if abs(tau) < 1e-3:
        return optimize.newton(lambda t: frank_tau(t) - tau, 9.0 * tau, tol=1e-15)
    lo, hi = (1e-8, 50.0) if tau > 0 else (-50.0, -1e-8)
    if not min(frank_tau(lo), frank_tau(hi)) <= tau <= max(frank_tau(lo), frank_tau(hi)):
        raise ValueError(f"Frank cannot attain tau={tau} with |theta| <= 50")
    return optimize.brentq(lambda t: frank_tau(t) - tau, lo, hi, xtol=1e-12, rtol=1e-14, maxiter=200)


def tau_to_param(family, tau):
    """Parameter with the given Kendall's tau.

    For Clayton and Gumbel the parameter of ``|tau|`` is returned; negative
    dependence is realised by rotation (see :func:`spec_from_tau`). For Frank,
    ``tau = 0`` returns 0, which corresponds to independence.
    """
    tau = float(tau)
    if not -1.0 < tau < 1.0:
        raise ValueError(f"tau={tau} is not attainable")
    if family == "Independence":
        return 0.0
    if family in ("Gaussian", "StudentT"):
        return float(np.sin(np.pi * tau / 2.0))
    a = abs(tau)
    if family == "Clayton":
        return 2.0 * a / (1.0 - a)
    if family == "Gumbel":
        return 1.0 / (1.0 - a)
    if family == "Frank":
        return 0.0 if tau == 0.0 else float(_frank_theta(tau))
    raise ValueError(f"unknown family {family!r}")


def spec_from_tau(family, tau, rotation=0, df=None):
    """Build a FamilySpec with Kendall's tau equal to ``tau``.

    For Clayton/Gumbel, ``rotation`` gives the preferred orientation; it is
    flipped (0 <-> 90, 180 <-> 270) when its sign disagrees with ``tau``.
    """
    theta = tau_to_param(family, tau)
    if family == "Independence" or (tau == 0.0 and family in ("Clayton", "Gumbel", "Frank")):
        return INDEPENDENCE
    if family in ROTATABLE:
        negative = rotation in (90, 270)
        if (tau < 0) != negative:
            rotation = {0: 90, 90: 0, 180: 270, 270: 180}[rotation]
        return FamilySpec(family, rotation, theta)
    if family == "StudentT":
        return FamilySpec(family, 0, theta, 4.0 if df is None else float(df))
    return FamilySpec(family, 0, theta)


def sample_pair(spec, n, rng):
    """Draw n pairs by the conditional distribution method."""
    if n < 1:
        raise ValueError("n must be positive")
    w = clip_unit(rng.random((n, 2)))
    v = hinv2(spec, w[:, 1], w[:, 0])
    return np.column_stack([w[:, 0], v])


# --- fitted parametric copula ---------------------------------------------

class ParametricCopula(PairCopula):
    """A parametric pair-copula, either fitted (``par``) or a known truth."""

    estimator = "par"

    def __init__(self, spec, loglik=0.0, nobs=0):
        self.spec = spec
        self.loglik = float(loglik)
        self.nobs = int(nobs)

    @property
    def edf(self):
        return float(self.spec.nparams)

    def pdf(self, u, v):
        return pdf(self.spec, u, v)

    def logpdf(self, u, v):
        return logpdf(self.spec, u, v)

    def hfunc1(self, u, v):
        return hfunc1(self.spec, u, v)

    def hfunc2(self, u, v):
        return hfunc2(self.spec, u, v)

    def hinv1(self, p, v):
        return hinv1(self.spec, p, v)

    def hinv2(self, p, u):
        return hinv2(self.spec, p, u)

    def summary(self):
        out = super().summary()
        out.update(self.spec.to_dict())
        return out

    def to_dict(self):
        return {"estimator": self.estimator, "spec": self.spec.to_dict(),
                "loglik": self.loglik, "nobs": self.nobs}

    @classmethod
    def from_dict(cls, d):
        return cls(FamilySpec.from_dict(d["spec"]), d.get("loglik", 0.0), d.get("nobs", 0))

    def __repr__(self):
        return f"ParametricCopula({self.spec})"


def independence_copula(nobs=0):
    return ParametricCopula(INDEPENDENCE, 0.0, nobs)


# parameter polishing happens on an unbounded scale around the tau inversion
def _to_free(family, theta):
    if family in ("Gaussian", "StudentT"):
        return np.arctanh(theta)
    if family == "Clayton":
        return np.log(theta)
    if family == "Gumbel":
        return np.log(theta - 1.0 + 1e-6)
    return theta


def _from_free(family, z):
    if family in ("Gaussian", "StudentT"):
        return np.tanh(z)
    if family == "Clayton":
        return np.exp(z)
    if family == "Gumbel":
        return 1.0 + np.exp(z) - 1e-6
    return z


def _polish(family, theta0, negloglik, width=2.0):
    lo_t, hi_t = _BOUNDS[family]
    z0 = _to_free(family, np.clip(theta0, lo_t + 1e-6, hi_t - 1e-6))
    if family == "Frank":
        width = max(2.0, 0.5 * abs(theta0))
    zlo = max(z0 - width, _to_free(family, lo_t + 1e-6))
    zhi = min(z0 + width, _to_free(family, hi_t - 1e-6))
    if family == "Frank":
        # keep the sign fixed by the tau inversion
        if theta0 > 0:
            zlo = max(zlo, 1e-4)
        else:
            zhi = min(zhi, -1e-4)
    res = optimize.minimize_scalar(lambda z: negloglik(_from_free(family, z)),
                                   bounds=(zlo, zhi), method="bounded",
                                   options={"xatol": 1e-7})
    theta = float(_from_free(family, res.x))
    return theta, -float(res.fun)


def _candidates(u, v, tau):
    """Yield (spec, loglik) for every candidate family/rotation."""
    yield INDEPENDENCE, 0.0
    tau = float(np.clip(tau, -0.95, 0.95))
    if tau == 0.0:
        tau = 1e-6

    x, y = special.ndtri(u), special.ndtri(v)
    r0 = np.sin(np.pi * tau / 2.0)

    def gauss_nll(r):
        r2 = 1.0 - r * r
        return -np.sum(-0.5 * np.log(r2) - (r * r * (x * x + y * y) - 2.0 * r * x * y) / (2.0 * r2))

    rho, ll = _polish("Gaussian", r0, gauss_nll)
    yield FamilySpec("Gaussian", 0, rho), ll

    # profile df at the tau-inversion correlation on a coarse subgrid, fill
    # in the integers around its maximum, then polish rho at the best df and
    # its two neighbours
    scores = {}
    quantiles = {}

    def profile(df):
        if df not in scores:
            quantiles[df] = (special.stdtrit(df, u), special.stdtrit(df, v))
            scores[df] = np.sum(_t_logpdf_xy(r0, df, *quantiles[df]))
        return scores[df]

    coarse = [df for df in (3, 4, 6, 9, 13, 19, 30) if df in STUDENT_DF_GRID]
    i = int(np.argmax([profile(df) for df in coarse]))
    lo = coarse[max(i - 1, 0)]
    hi = coarse[min(i + 1, len(coarse) - 1)]
    for df in range(lo, hi + 1):
        profile(df)
    grid = sorted(scores)
    i = int(np.argmax([scores[df] for df in grid]))
    best = None
    for df in grid[max(i - 1, 0):i + 2]:
        xt, yt = quantiles[df]
        r, ll_t = _polish("StudentT", r0, lambda r: -np.sum(_t_logpdf_xy(r, df, xt, yt)))
        if best is None or ll_t > best[2]:
            best = (df, r, ll_t)
    yield FamilySpec("StudentT", 0, best[1], float(best[0])), best[2]

    rotations = (0, 180) if tau > 0 else (90, 270)
    for fam in ("Clayton", "Gumbel"):
        theta0 = tau_to_param(fam, tau)
        for rot in rotations:
            uu = 1.0 - u if rot in (90, 180) else u
            vv = 1.0 - v if rot in (180, 270) else v
            nll = lambda t, fam=fam, uu=uu, vv=vv: -np.sum(_base_logpdf(fam, t, None, uu, vv))
            theta, ll = _polish(fam, max(theta0, _BOUNDS[fam][0] + 1e-3), nll)
            yield FamilySpec(fam, rot, theta), ll

    try:
        theta0 = _frank_theta(round(tau, 12))
    except ValueError:
        theta0 = np.sign(tau) * 45.0
    theta, ll = _polish("Frank", theta0, lambda t: -np.sum(_base_logpdf("Frank", t, None, u, v)))
    if theta != 0.0:
        yield FamilySpec("Frank", 0, theta), ll


def tau_independence_pvalue(tau, n):
    """Two-sided p-value of the asymptotic Kendall's tau independence test."""
    z = 3.0 * tau * np.sqrt(n * (n - 1.0)) / np.sqrt(2.0 * (2.0 * n + 5.0))
    return float(2.0 * special.ndtr(-abs(z)))


def fit_parametric(u, v, indep_level=None):
    """Select the parametric family minimising AIC.

    Every candidate (Independence, Gaussian, Student t with df profiled over
    3..30, Clayton and Gumbel in the rotations matching the sign of the
    empirical tau, Frank) starts at the tau-inversion estimate and is
    polished by one-dimensional likelihood maximisation.

    Parameters
    ----------
    u, v : array_like
    indep_level : float, optional
        When given, Independence is returned without fitting whenever the
        Kendall's tau independence test does not reject at this level.

    Returns
    -------
    ParametricCopula
    """
    u = clip_unit(np.asarray(u, dtype=float).ravel())
    v = clip_unit(np.asarray(v, dtype=float).ravel())
    if u.size != v.size:
        raise ValueError("length mismatch")
    if u.size < 10:
        raise ValueError("fit_parametric needs at least 10 observations")
    tau = kendalls_tau(u, v)
    if indep_level is not None and tau_independence_pvalue(tau, u.size) > indep_level:
        return ParametricCopula(INDEPENDENCE, 0.0, u.size)
    best_spec, best_ll, best_aic = None, None, np.inf
    for spec, ll in _candidates(u, v, tau):
        if not np.isfinite(ll):
            continue
        aic = -2.0 * ll + 2.0 * spec.nparams
        if aic < best_aic:
            best_spec, best_ll, best_aic = spec, ll, aic
    return ParametricCopula(best_spec, best_ll, u.size)


__all__ = [
    "FAMILIES", "FamilySpec", "INDEPENDENCE", "ParametricCopula", "fit_parametric",
    "tau_independence_pvalue",
    "frank_tau", "hfunc", "hfunc1", "hfunc2", "hinv", "hinv1", "hinv2",
    "independence_copula", "logpdf", "param_to_tau", "pdf", "sample_pair",
    "spec_from_tau", "tau_to_param", "CLIP_EPS",
]
