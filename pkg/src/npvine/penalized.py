"""
Penalized Bernstein (``pbern``) and penalized linear / quadratic B-spline
(``pspl1``, ``pspl2``) copula density estimators.

The density is a tensor-product expansion ``c(u) = sum_k v_k b_k(u)`` over a
normalized basis. Coefficients maximize the penalized log-likelihood::

    l(v) - lambda/2 v'Pv,    l(v) = sum_i log c(U_i; v)

subject to ``v >= 0``, total mass one and uniform margins. Each value of
lambda on a log-spaced grid is solved by damped Newton steps, every step a
quadratic program; lambda is then picked by the corrected AIC using the
effective degrees of freedom of the penalized fit.
"""
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import interpolate, linalg

from .bernstein import BernsteinBasis, TensorCopula, bernstein_margin_constraints, tensor_design
from .core import clip_unit
from .pair import caic
from .qp import solve_qp

DENSITY_FLOOR = 1e-10
LAMBDA_GRID = np.logspace(-4, 4, 15)
DEFAULT_K = {"Bernstein": 14, 1: 14, 2: 10}


@dataclass(frozen=True)
class BasisSpec:
    """Basis choice: ``kind`` is "Bernstein" or "BSpline" (degree ``q``)."""

    kind: str
    K: int
    q: int = 0

    def __post_init__(self):
        if self.kind not in ("Bernstein", "BSpline"):
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if self.kind == "BSpline":
            if self.q not in (1, 2):
                raise ValueError("B-spline degree q must be 1 or 2")
            if self.K < 1:
                raise ValueError("B-splines need K >= 1")
        elif self.K < 0:
            raise ValueError("Bernstein degree K must be nonnegative")

    @classmethod
    def default(cls, tag):
        """Default basis for an estimator tag (pbern, pspl1, pspl2)."""
        if tag == "pbern":
            return cls("Bernstein", DEFAULT_K["Bernstein"])
        if tag in ("pspl1", "pspl2"):
            q = int(tag[-1])
            return cls("BSpline", DEFAULT_K[q], q)
        raise ValueError(f"no penalized basis for estimator {tag!r}")

    @property
    def knots(self):
        if self.kind != "BSpline":
            return None
        return np.arange(self.K + 1) / self.K

    def to_dict(self):
        return {"kind": self.kind, "K": self.K, "q": self.q}


class BSplineBasis:
    """Clamped B-splines of degree q on K equal intervals of [0, 1],
    each scaled to integrate to one."""

    kind = "BSpline"

    def __init__(self, K, q):
        self.K, self.q = int(K), int(q)
        inner = np.arange(self.K + 1) / self.K
        self.t = np.concatenate([np.zeros(q), inner, np.ones(q)])
        self.size = self.K + q
        # integral of the raw basis function k is (t_{k+q+1} - t_k) / (q + 1)
        self.w = (self.t[q + 1:] - self.t[:self.size]) / (q + 1)
        spl = interpolate.BSpline(self.t, np.diag(1.0 / self.w), q, extrapolate=False)
        self._spl = spl
        self._anti = spl.antiderivative()
        self._d2 = spl.derivative(2) if q >= 2 else None

    def eval(self, x):
        x = np.clip(np.asarray(x, dtype=float).ravel(), 0.0, 1.0)
        return self._spl(x)

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=float).ravel(), 0.0, 1.0)
        return self._anti(x)

    def weights(self):
        """Coefficients w with sum_k w_k B_k = 1."""
        return self.w.copy()

    def to_dict(self):
        return {"kind": self.kind, "K": self.K, "q": self.q}


def build_basis(spec):
    """Basis evaluator with ``eval``, ``cdf`` and ``size``."""
    if spec.kind == "Bernstein":
        return BernsteinBasis(spec.K)
    return BSplineBasis(spec.K, spec.q)


def constraint_points(spec):
    """Evaluation points of the B-spline margin constraints: the knots for
    linear splines, and 0, the interval midpoints and 1 for quadratic ones."""
    K = spec.K
    if spec.q == 1:
        return np.arange(K + 1) / K
    mids = (np.arange(K) + 0.5) / K
    return np.concatenate([[0.0], mids, [1.0]])


def build_margin_constraints(spec):
    """Equality constraints ``A v = rhs`` on the row-major flattened
    coefficients: total mass one followed by the two margin conditions.

    The system always contains one redundant row.
    """
    if spec.kind == "Bernstein":
        return bernstein_margin_constraints(spec.K)
    basis = build_basis(spec)
    M = basis.size
    Bk = basis.eval(constraint_points(spec))
    ones = np.ones((1, M))
    # int c(u1, u2) du1 = sum_{k1,k2} v[k1,k2] B_k2(u2)
    A_u2 = np.kron(ones, Bk)
    A_u1 = np.kron(Bk, ones)
    A = np.vstack([np.ones((1, M * M)), A_u1, A_u2])
    rhs = np.concatenate([[1.0], np.ones(A.shape[0] - 1)])
    return A, rhs


def difference_matrix(size, order):
    """``order``-th order difference operator, shape (size - order, size).

    Rows of the first-order operator read (1, -1, 0, ...); higher orders are
    repeated applications of it.
    """
    return (-1) ** order * np.diff(np.eye(size), n=order, axis=0) + 0.0


def _gauss_legendre(K, nodes_per_piece, breaks):
    x, w = np.polynomial.legendre.leggauss(nodes_per_piece)
    xs, ws = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        xs.append(0.5 * (b - a) * x + 0.5 * (a + b))
        ws.append(0.5 * (b - a) * w)
    return np.concatenate(xs), np.concatenate(ws)


def build_penalty(spec):
    """Symmetric positive semidefinite penalty matrix.

    Bernstein: integrated squared second derivatives in each direction,
    ``D2 (x) G + G (x) D2`` with ``D2`` and ``G`` the Gram matrices of the
    basis second derivatives and of the basis, computed by exact
    Gauss-Legendre quadrature.

    B-spline: squared differences of order m = q + 1 along each axis,
    ``I (x) L'L + L'L (x) I``.
    """
    if spec.kind == "Bernstein":
        basis = BernsteinBasis(spec.K)
        x, w = _gauss_legendre(spec.K, spec.K + 2, [0.0, 1.0])
        B = basis.eval(x)
        B2 = basis.deriv2(x)
        G = (B * w[:, None]).T @ B
        D2 = (B2 * w[:, None]).T @ B2
        P = np.kron(D2, G) + np.kron(G, D2)
    else:
        M = spec.K + spec.q
        L = difference_matrix(M, spec.q + 1)
        LtL = L.T @ L
        eye = np.eye(M)
        P = np.kron(eye, LtL) + np.kron(LtL, eye)
    return 0.5 * (P + P.T)


class PenalizedCopula(TensorCopula):
    """A penalized tensor-product copula density."""

    def __init__(self, spec, coeffs, lam, edf, loglik=0.0, nobs=0, converged=True,
                 estimator=None):
        super().__init__(build_basis(spec), coeffs, loglik, nobs)
        self.spec = spec
        self.lam = float(lam)
        self._edf = float(edf)
        self.converged = bool(converged)
        if estimator is None:
            estimator = "pbern" if spec.kind == "Bernstein" else f"pspl{spec.q}"
        self.estimator = estimator

    @property
    def edf(self):
        return self._edf

    def summary(self):
        out = super().summary()
        out.update({"lambda": self.lam, "K": self.spec.K, "converged": self.converged})
        return out

    def to_dict(self):
        out = self.coefficient_dict()
        out.update({"estimator": self.estimator, "spec": self.spec.to_dict(),
                    "lambda": self.lam, "edf": self._edf, "converged": self.converged})
        return out

    @classmethod
    def from_dict(cls, d):
        spec = BasisSpec(**d["spec"])
        return cls(spec, np.asarray(d["coeffs"]), d["lambda"], d["edf"], d.get("loglik", 0.0),
                   d.get("nobs", 0), d.get("converged", True), d.get("estimator"))


def _null_space_basis(A):
    return linalg.null_space(A, rcond=1e-10)


def effective_df(H, P, lam, Z):
    """``trace((H + lam P)^-1 H)`` restricted to the span of Z."""
    Hz = Z.T @ H @ Z
    Pz = Z.T @ P @ Z
    Hz = 0.5 * (Hz + Hz.T)
    M = Hz + lam * 0.5 * (Pz + Pz.T)
    M = M + 1e-10 * max(1.0, np.max(np.abs(np.diag(M)))) * np.eye(M.shape[0])
    # the trace equals the sum of the generalized eigenvalues of (Hz, M),
    # each of which lies in [0, 1]
    mu = linalg.eigh(Hz, M, eigvals_only=True)
    return float(np.sum(np.clip(mu, 0.0, 1.0)))


def _loglik_parts(Bx, x):
    dens = np.maximum(Bx @ x, DENSITY_FLOOR)
    return dens, float(np.sum(np.log(dens)))


def _newton(Bx, P, lam, A, rhs, x, tol=1e-6, max_iter=50):
    """Maximize l(x) - lam/2 x'Px over the constraint set from feasible x.

    Returns (x, loglik, H, converged).
    """
    M = x.size
    Gid = np.eye(M)
    h0 = np.zeros(M)
    dens, ll = _loglik_parts(Bx, x)
    obj = ll - 0.5 * lam * x @ P @ x
    converged = False
    H = None
    for _ in range(max_iter):
        W = Bx / dens[:, None]
        g = W.sum(axis=0)
        H = W.T @ W
        Q = H + lam * P
        Q = 0.5 * (Q + Q.T)
        res = solve_qp(Q, -2.0 * g, A, rhs, G=Gid, h=h0, x0=x)
        if res.status.value == "Infeasible":
            break
        delta = np.maximum(res.x, 0.0) - x
        alpha = 1.0
        improved = False
        for _ in range(30):
            cand = x + alpha * delta
            d_c, ll_c = _loglik_parts(Bx, cand)
            obj_c = ll_c - 0.5 * lam * cand @ P @ cand
            if obj_c >= obj - 1e-12 * max(1.0, abs(obj)):
                improved = True
                break
            alpha *= 0.5
        if not improved:
            converged = True
            break
        step = np.max(np.abs(alpha * delta))
        gain = obj_c - obj
        x, dens, ll, obj = cand, d_c, ll_c, obj_c
        if step <= tol or gain < 1e-8:
            converged = True
            break
    W = Bx / dens[:, None]
    H = W.T @ W
    return x, ll, H, converged


def fit_penalized(u, v, spec, lambdas=None):
    """Fit a penalized tensor-product copula density.

    Parameters
    ----------
    u, v : array_like
        Copula-scale observations.
    spec : BasisSpec
    lambdas : array_like, optional
        Penalty grid; defaults to 15 log-spaced values in [1e-4, 1e4]. The
        penalty matrix is rescaled so that its trace matches the trace of the
        likelihood Hessian at the uniform density, which makes the grid
        comparable across bases and sample sizes.

    Returns
    -------
    PenalizedCopula
        The fit with the smallest corrected AIC. ``converged`` is False when
        no grid value converged.
    """
    u = clip_unit(np.asarray(u, dtype=float).ravel())
    v = clip_unit(np.asarray(v, dtype=float).ravel())
    if u.size != v.size:
        raise ValueError("length mismatch")
    n = u.size
    if n < 10:
        raise ValueError("fit_penalized needs at least 10 observations")
    lambdas = LAMBDA_GRID if lambdas is None else np.asarray(lambdas, dtype=float)
    basis = build_basis(spec)
    Bx = tensor_design(basis, u, v)
    A, rhs = build_margin_constraints(spec)
    # the penalty acts on the coefficients of the unnormalized basis, which
    # are constant exactly for the independence copula
    w = basis.weights()
    scale = 1.0 / np.outer(w, w).ravel()
    P = build_penalty(spec) * scale[:, None] * scale[None, :]
    trP = np.trace(P)
    H0 = Bx.T @ Bx
    Pn = P * (np.trace(H0) / trP) if trP > 0 else P
    Z = _null_space_basis(A)

    x = np.outer(w, w).ravel()
    x /= x.sum()
    fits = []
    for lam in sorted(lambdas, reverse=True):
        x, ll, H, conv = _newton(Bx, Pn, lam, A, rhs, x)
        edf = effective_df(H, Pn, lam, Z)
        fits.append((caic(ll, edf, n), conv, lam, x.copy(), ll, edf))
    pool = [f for f in fits if f[1]] or fits
    if not any(f[1] for f in fits):
        warnings.warn("penalized fit did not converge for any penalty value", RuntimeWarning)
    best = min(pool, key=lambda f: (f[0], -f[2]))
    fit = PenalizedCopula(spec, best[3], best[2], best[5], best[4], n, best[1])
    fit.lambda_path = [(f[2], f[0], f[5]) for f in fits]
    return fit


def fit_pbern(u, v, K=None):
    return fit_penalized(u, v, BasisSpec("Bernstein", DEFAULT_K["Bernstein"] if K is None else K))


def fit_pspl(u, v, q, K=None):
    return fit_penalized(u, v, BasisSpec("BSpline", DEFAULT_K[q] if K is None else K, q))


__all__ = [
    "BSplineBasis", "BasisSpec", "LAMBDA_GRID", "PenalizedCopula", "build_basis",
    "build_margin_constraints", "build_penalty", "constraint_points", "difference_matrix",
    "effective_df", "fit_pbern", "fit_penalized", "fit_pspl",
]
