"""
Empirical Bernstein copula density (``bern``) and the tensor-product density
machinery shared with the penalized spline estimators.

A tensor-product copula density has the form::

    c(u1, u2) = sum_{k1, k2} V[k1, k2] B_k1(u1) B_k2(u2)

with a univariate basis whose functions each integrate to one. Densities and
both h-functions are evaluated in closed form from the basis and its
antiderivative.
"""
import numpy as np
from scipy import special

from .core import clip_unit, spearmans_rho
from .pair import PDF_FLOOR, PairCopula
from .qp import solve_qp


def bernstein_basis(K, k, u):
    """Normalized Bernstein polynomial ``(K+1) C(K,k) u^k (1-u)^(K-k)``.

    This is the Beta(k+1, K-k+1) density, so it integrates to one on [0, 1].
    """
    if not 0 <= k <= K:
        raise ValueError(f"basis index {k} outside 0..{K}")
    u = np.asarray(u, dtype=float)
    return (K + 1) * special.comb(K, k) * u ** k * (1.0 - u) ** (K - k)


class BernsteinBasis:
    """The K+1 normalized Bernstein polynomials of degree K."""

    kind = "Bernstein"

    def __init__(self, K):
        if K < 0:
            raise ValueError("K must be nonnegative")
        self.K = int(K)
        self.size = self.K + 1
        k = np.arange(self.size)
        self._k = k
        self._scale = (self.K + 1) * special.comb(self.K, k)

    def eval(self, x):
        """Basis matrix, shape (len(x), K+1)."""
        x = np.clip(np.asarray(x, dtype=float).ravel(), 0.0, 1.0)[:, None]
        return self._scale * x ** self._k * (1.0 - x) ** (self.K - self._k)

    def cdf(self, x):
        """Antiderivatives from 0 (regularized incomplete beta functions)."""
        x = np.clip(np.asarray(x, dtype=float).ravel(), 0.0, 1.0)[:, None]
        return special.betainc(self._k + 1.0, self.K - self._k + 1.0, x)

    def deriv2(self, x):
        """Second derivatives of the basis, shape (len(x), K+1)."""
        x = np.asarray(x, dtype=float).ravel()
        K = self.K
        out = np.zeros((x.size, self.size))
        if K < 2:
            return out
        # d2/dx2 of b_{k,K} = K(K-1)(b_{k-2,K-2} - 2 b_{k-1,K-2} + b_{k,K-2})
        lower = np.zeros((x.size, K + 3))
        kk = np.arange(K - 1)
        xx = x[:, None]
        lower[:, 2:K + 1] = special.comb(K - 2, kk) * xx ** kk * (1.0 - xx) ** (K - 2 - kk)
        raw = K * (K - 1) * (lower[:, 0:K + 1] - 2.0 * lower[:, 1:K + 2] + lower[:, 2:K + 3])
        return (K + 1) * raw

    def weights(self):
        """Coefficients w with sum_k w_k B_k = 1."""
        return np.full(self.size, 1.0 / self.size)

    def to_dict(self):
        return {"kind": self.kind, "K": self.K}


class TensorCopula(PairCopula):
    """Copula density spanned by tensor products of a normalized basis."""

    def __init__(self, basis, coeffs, loglik=0.0, nobs=0):
        self.basis = basis
        self.coeffs = np.asarray(coeffs, dtype=float).reshape(basis.size, basis.size)
        self.loglik = float(loglik)
        self.nobs = int(nobs)

    def pdf(self, u, v):
        u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
        shape = u.shape
        b1 = self.basis.eval(u.ravel())
        b2 = self.basis.eval(v.ravel())
        out = np.einsum("ij,ij->i", b1 @ self.coeffs, b2)
        return np.maximum(out, 0.0).reshape(shape)

    def _cond(self, x, cond, transpose):
        x, cond = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(cond, dtype=float))
        shape = x.shape
        V = self.coeffs.T if transpose else self.coeffs
        bc = self.basis.eval(cond.ravel())
        Fx = self.basis.cdf(x.ravel())
        num = np.einsum("ij,ij->i", Fx @ V, bc)
        total = bc @ (np.ones(self.basis.size) @ V)
        ok = total > PDF_FLOOR
        h = np.where(ok, num / np.where(ok, total, 1.0), np.clip(x.ravel(), 0.0, 1.0))
        return np.clip(h, 0.0, 1.0).reshape(shape)

    def hfunc1(self, u, v):
        return self._cond(u, v, transpose=False)

    def hfunc2(self, u, v):
        return self._cond(v, u, transpose=True)

    def coefficient_dict(self):
        return {"basis": self.basis.to_dict(), "coeffs": self.coeffs.tolist(),
                "loglik": self.loglik, "nobs": self.nobs}


def tensor_design(basis, u, v):
    """Rows ``kron(B(u_i), B(v_i))`` matching row-major flattening of V."""
    b1 = basis.eval(u)
    b2 = basis.eval(v)
    return (b1[:, :, None] * b2[:, None, :]).reshape(b1.shape[0], -1)


def select_K(n, rho_hat):
    """Data-driven Bernstein degree ``floor(n^(1/3) exp(|rho|^(1/n)) (|rho| + 0.1))``,
    clamped below at 1."""
    if n < 2:
        raise ValueError("select_K needs n >= 2")
    r = abs(float(rho_hat))
    K = np.floor(n ** (1.0 / 3.0) * np.exp(r ** (1.0 / n)) * (r + 0.1))
    return max(1, int(K))


def cell_frequencies(u, v, K):
    """Relative frequencies over the (K+1) x (K+1) grid of equal cells.

    Points on an interior cell boundary go to the lower cell; the top edge
    belongs to the last cell.
    """
    m = K + 1
    i = np.clip(np.ceil(np.asarray(u) * m).astype(int) - 1, 0, K)
    j = np.clip(np.ceil(np.asarray(v) * m).astype(int) - 1, 0, K)
    counts = np.zeros((m, m))
    np.add.at(counts, (i, j), 1.0)
    return counts / counts.sum()


def bernstein_margin_constraints(K):
    """Equality system (A, rhs) for total mass one and uniform margins."""
    m = K + 1
    eye = np.eye(m)
    ones = np.ones((1, m))
    A = np.vstack([np.ones((1, m * m)), np.kron(eye, ones), np.kron(ones, eye)])
    rhs = np.concatenate([[1.0], np.full(2 * m, 1.0 / m)])
    return A, rhs


def project_coefficients(target, K):
    """Closest coefficient matrix (Frobenius norm) with nonnegative entries,
    unit total mass and all row/column sums equal to 1/(K+1)."""
    m = K + 1
    A, rhs = bernstein_margin_constraints(K)
    x0 = np.full(m * m, 1.0 / (m * m))
    res = solve_qp(np.eye(m * m), -np.ravel(target), A, rhs,
                   G=np.eye(m * m), h=np.zeros(m * m), x0=x0)
    if res.status.value == "Infeasible":
        raise RuntimeError("Bernstein margin projection reported infeasibility")
    return np.maximum(res.x, 0.0).reshape(m, m), res


class BernsteinCopula(TensorCopula):
    """Empirical Bernstein copula density with margin-corrected coefficients."""

    estimator = "bern"

    def __init__(self, K, coeffs, loglik=0.0, nobs=0):
        super().__init__(BernsteinBasis(K), coeffs, loglik, nobs)
        self.K = int(K)

    @property
    def edf(self):
        return float((self.K + 1) ** 2 - (2 * self.K + 1) - 1)

    def summary(self):
        out = super().summary()
        out["K"] = self.K
        return out

    def to_dict(self):
        out = self.coefficient_dict()
        out["estimator"] = self.estimator
        out["K"] = self.K
        return out

    @classmethod
    def from_dict(cls, d):
        return cls(d["K"], np.asarray(d["coeffs"]), d.get("loglik", 0.0), d.get("nobs", 0))


def fit_bern(u, v, K=None):
    """Fit the empirical Bernstein copula density.

    Parameters
    ----------
    u, v : array_like
        Copula-scale observations.
    K : int, optional
        Polynomial degree; chosen by :func:`select_K` from Spearman's rho
        when omitted.

    Returns
    -------
    BernsteinCopula
    """
    u = clip_unit(np.asarray(u, dtype=float).ravel())
    v = clip_unit(np.asarray(v, dtype=float).ravel())
    if u.size != v.size:
        raise ValueError("length mismatch")
    n = u.size
    if n < 10:
        raise ValueError("fit_bern needs at least 10 observations")
    if K is None:
        try:
            rho = spearmans_rho(u, v)
        except ValueError:
            rho = 0.0
        K = select_K(n, rho)
    freq = cell_frequencies(u, v, K)
    coeffs, _ = project_coefficients(freq, K)
    fit = BernsteinCopula(K, coeffs, 0.0, n)
    fit.loglik = float(np.sum(fit.logpdf(u, v)))
    return fit


__all__ = [
    "BernsteinBasis", "BernsteinCopula", "TensorCopula", "bernstein_basis",
    "bernstein_margin_constraints", "cell_frequencies", "fit_bern",
    "project_coefficients", "select_K", "tensor_design",
]
