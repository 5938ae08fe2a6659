"""
Dense convex quadratic programming by a primal active-set method.

Solves::

    minimize    1/2 x'Qx + c'x
    subject to  A x  = b
                G x >= h

Rows of ``G`` with a single nonzero entry are recognised as simple bounds;
variables held at an active bound are eliminated from the KKT system, which
keeps the per-iteration cost low for the nonnegativity-heavy problems arising
in copula coefficient estimation.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import linalg, optimize

EQ_RANK_TOL = 1e-10
RIDGE_FLOOR = 1e-10


class QpStatus(str, Enum):
    OPTIMAL = "Optimal"
    MAX_ITER = "MaxIter"
    INFEASIBLE = "Infeasible"


@dataclass
class QpResult:
    x: np.ndarray
    status: QpStatus
    eq_multipliers: np.ndarray
    ineq_multipliers: np.ndarray
    iterations: int

    @property
    def ok(self):
        return self.status is QpStatus.OPTIMAL


def independent_rows(A, tol=EQ_RANK_TOL):
    """Indices of a maximal linearly independent subset of the rows of A."""
    if A.shape[0] == 0:
        return np.zeros(0, dtype=int)
    _, r, piv = linalg.qr(A.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0.0:
        return np.zeros(0, dtype=int)
    rank = int(np.sum(diag > tol * max(1.0, diag[0])))
    return np.sort(piv[:rank])


def _as_2d(M, ncol):
    if M is None:
        return np.zeros((0, ncol))
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return np.zeros((0, ncol))
    if M.shape[1] != ncol:
        raise ValueError(f"constraint matrix has {M.shape[1]} columns, expected {ncol}")
    return M


def _as_1d(v, size):
    if v is None:
        return np.zeros(size)
    v = np.asarray(v, dtype=float).ravel()
    if v.size != size:
        raise ValueError(f"right-hand side has length {v.size}, expected {size}")
    return v


def _phase_one(A, b, G, h, bound_var, bound_coef, tol):
    """Find a feasible point: projection onto the equalities plus clipping of
    simple bounds, with an LP fallback."""
    n = A.shape[1] if A.shape[0] else G.shape[1]
    if A.shape[0]:
        pinv = np.linalg.pinv(A)
        x = pinv @ b
    else:
        pinv = None
        x = np.zeros(n)
    is_bound = bound_var >= 0
    lo = np.full(n, -np.inf)
    hi = np.full(n, np.inf)
    for i in np.flatnonzero(is_bound):
        j = bound_var[i]
        val = h[i] / bound_coef[i]
        if bound_coef[i] > 0:
            lo[j] = max(lo[j], val)
        else:
            hi[j] = min(hi[j], val)
    for _ in range(200):
        if _max_violation(x, A, b, G, h) <= tol:
            return x
        x = np.clip(x, lo, hi)
        if pinv is not None:
            x = x - pinv @ (A @ x - b)
    if _max_violation(x, A, b, G, h) <= tol:
        return x
    res = optimize.linprog(
        np.zeros(n),
        A_ub=-G if G.shape[0] else None,
        b_ub=-h if G.shape[0] else None,
        A_eq=A if A.shape[0] else None,
        b_eq=b if A.shape[0] else None,
        bounds=[(None, None)] * n,
        method="highs",
    )
    if res.status != 0:
        return None
    return res.x


def _max_violation(x, A, b, G, h):
    viol = 0.0
    if A.shape[0]:
        viol = np.max(np.abs(A @ x - b))
    if G.shape[0]:
        viol = max(viol, np.max(h - G @ x))
    return viol


def _kkt_dense(Qf, Cf, gf):
    """Equality-constrained step: minimize 1/2 s'Qs + g's subject to C s = 0.

    Returns the step and the multipliers lam with Q s + g = C' lam.
    """
    nf, nc = Qf.shape[0], Cf.shape[0]
    K = np.zeros((nf + nc, nf + nc))
    K[:nf, :nf] = Qf
    K[:nf, nf:] = Cf.T
    K[nf:, :nf] = Cf
    rhs = np.concatenate([-gf, np.zeros(nc)])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    return sol[:nf], -sol[nf:]


def _kkt_diagonal(qf, Cf, gf):
    # Schur complement on the multipliers when Q is diagonal
    if Cf.shape[0] == 0:
        return -gf / qf, np.zeros(0)
    CD = Cf / qf
    S = CD @ Cf.T
    r = CD @ gf
    try:
        lam = linalg.solve(S, r, assume_a="pos")
    except (linalg.LinAlgError, ValueError):
        lam = np.linalg.lstsq(S, r, rcond=None)[0]
    return (Cf.T @ lam - gf) / qf, lam


def solve_qp(Q, c, A=None, b=None, G=None, h=None, x0=None, tol=1e-9, max_iter=None):
    """Solve a dense convex QP with a primal active-set method.

    Parameters
    ----------
    Q : array_like, shape (n, n)
        Symmetric positive semidefinite matrix. A ridge of
        ``max(0, 1e-10 - lambda_min)`` is added to make it strictly convex.
    c : array_like, shape (n,)
    A, b : array_like, optional
        Equality constraints ``A x = b``. Linearly dependent rows are dropped.
    G, h : array_like, optional
        Inequality constraints ``G x >= h``.
    x0 : array_like, optional
        Starting point. Used as is when feasible (warm start); constraints
        active at ``x0`` seed the working set.
    tol : float
        Feasibility / optimality tolerance.
    max_iter : int, optional
        Iteration cap, defaults to ``10 * n``.

    Returns
    -------
    QpResult
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    n = Q.shape[0]
    if Q.shape != (n, n):
        raise ValueError("Q must be square")
    asym = np.max(np.abs(Q - Q.T)) if n else 0.0
    if asym > 1e-10 * max(1.0, np.max(np.abs(Q))):
        raise ValueError("Q is not symmetric")
    Q = 0.5 * (Q + Q.T)
    c = _as_1d(c, n)
    A = _as_2d(A, n)
    b = _as_1d(b, A.shape[0])
    G = _as_2d(G, n)
    h = _as_1d(h, G.shape[0])
    m = G.shape[0]
    if max_iter is None:
        max_iter = 10 * max(n, 1)

    qdiag = np.diag(Q).copy()
    if np.count_nonzero(Q - np.diag(qdiag)) == 0:
        qdiag = np.maximum(qdiag, RIDGE_FLOOR)
        Q = np.diag(qdiag)
    else:
        qdiag = None
        lam_min = linalg.eigvalsh(Q, subset_by_index=[0, 0])[0] if n else 0.0
        ridge = max(0.0, RIDGE_FLOOR - lam_min)
        if ridge > 0.0:
            Q = Q + ridge * np.eye(n)

    empty = QpResult(np.full(n, np.nan), QpStatus.INFEASIBLE, np.zeros(A.shape[0]), np.zeros(m), 0)

    # drop redundant equality rows, reject inconsistent systems
    if A.shape[0]:
        keep = independent_rows(A)
        if keep.size < A.shape[0]:
            xls = np.linalg.lstsq(A, b, rcond=None)[0]
            if np.max(np.abs(A @ xls - b)) > max(tol, 1e-8) * max(1.0, np.max(np.abs(b))):
                return empty
        eq_rows = keep
    else:
        eq_rows = np.zeros(0, dtype=int)
    Ae, be = A[eq_rows], b[eq_rows]
    p = Ae.shape[0]

    # classify simple bound rows
    nnz = np.count_nonzero(G, axis=1) if m else np.zeros(0, dtype=int)
    bound_var = np.full(m, -1)
    bound_coef = np.zeros(m)
    for i in np.flatnonzero(nnz == 1):
        j = int(np.flatnonzero(G[i])[0])
        bound_var[i] = j
        bound_coef[i] = G[i, j]

    x = None
    if x0 is not None:
        x = np.asarray(x0, dtype=float).copy()
        if x.shape != (n,) or _max_violation(x, Ae, be, G, h) > max(tol, 1e-8):
            x = None
    if x is None:
        x = _phase_one(Ae, be, G, h, bound_var, bound_coef, tol)
        if x is None:
            return empty

    # initial working set: independent subset of the active constraints
    work = []
    if m:
        slack = G @ x - h
        active = np.flatnonzero(np.abs(slack) <= max(tol, 1e-12))
        if active.size:
            if p:
                Z = linalg.null_space(Ae)
                proj = G[active] @ Z
            else:
                proj = G[active]
            if proj.shape[1]:
                work = list(active[independent_rows(proj)])
    in_work = np.zeros(m, dtype=bool)
    in_work[work] = True
    for i in work:
        if bound_var[i] >= 0:
            x[bound_var[i]] = h[i] / bound_coef[i]

    y = np.zeros(p)
    z = np.zeros(m)
    status = QpStatus.MAX_ITER
    subspace_min = False
    it = 0
    while it < max_iter:
        it += 1
        grad = Q @ x + c
        wb = [i for i in work if bound_var[i] >= 0]
        wg = [i for i in work if bound_var[i] < 0]
        fixed = np.zeros(n, dtype=bool)
        fixed[bound_var[wb]] = True
        free = np.flatnonzero(~fixed)
        C = np.vstack([Ae, G[wg]]) if wg else Ae
        Cf = C[:, free]
        step = np.zeros(n)
        if qdiag is not None:
            step[free], lam = _kkt_diagonal(qdiag[free], Cf, grad[free])
        else:
            step[free], lam = _kkt_dense(Q[np.ix_(free, free)], Cf, grad[free])

        scale = max(1.0, np.max(np.abs(x)))
        # after an unblocked full step x already minimizes over the working
        # set; recomputing the step would only return rounding noise
        if subspace_min or np.max(np.abs(step)) <= 1e-12 * scale:
            subspace_min = False
            y = lam[:p]
            z = np.zeros(m)
            if wg:
                z[wg] = lam[p:]
            if wb:
                resid = Q @ step + grad - C.T @ lam
                for i in wb:
                    z[i] = resid[bound_var[i]] / bound_coef[i]
            if not work:
                status = QpStatus.OPTIMAL
                break
            zw = z[work]
            k = int(np.argmin(zw))
            if zw[k] >= -tol * max(1.0, np.max(np.abs(grad))):
                status = QpStatus.OPTIMAL
                break
            drop = work.pop(k)
            in_work[drop] = False
            continue

        alpha = 1.0
        block = -1
        if m:
            Gp = G @ step
            cand = np.flatnonzero(~in_work & (Gp < -1e-14 * np.max(np.abs(step)) * np.maximum(1.0, np.abs(G).max(axis=1))))
            if cand.size:
                ratios = (h[cand] - G[cand] @ x) / Gp[cand]
                ratios = np.maximum(ratios, 0.0)
                k = int(np.argmin(ratios))
                if ratios[k] < 1.0:
                    alpha = ratios[k]
                    block = int(cand[k])
        x = x + alpha * step
        subspace_min = block < 0
        if block >= 0:
            work.append(block)
            in_work[block] = True
            if bound_var[block] >= 0:
                x[bound_var[block]] = h[block] / bound_coef[block]

    y_full = np.zeros(A.shape[0])
    y_full[eq_rows] = y
    return QpResult(x, status, y_full, z, it)
