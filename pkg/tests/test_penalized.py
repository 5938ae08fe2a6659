import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import integrate, linalg

from npvine.evaluation import importance_sample, measures_from_values
from npvine.penalized import (BasisSpec, PenalizedCopula, build_basis, build_margin_constraints,
                              build_penalty, constraint_points, difference_matrix, effective_df,
                              fit_penalized, fit_pbern, fit_pspl)

from helpers import fd_density_error, gauss_pair_sample, pair_truth

SPECS = [BasisSpec("Bernstein", 6), BasisSpec("BSpline", 5, 1), BasisSpec("BSpline", 5, 2)]


def test_defaults_and_validation():
    assert BasisSpec.default("pbern") == BasisSpec("Bernstein", 14)
    assert BasisSpec.default("pspl1") == BasisSpec("BSpline", 14, 1)
    assert BasisSpec.default("pspl2") == BasisSpec("BSpline", 10, 2)
    with pytest.raises(ValueError):
        BasisSpec("BSpline", 5, 3)
    assert_allclose(BasisSpec("BSpline", 4, 1).knots, [0, 0.25, 0.5, 0.75, 1])


@pytest.mark.parametrize("spec", SPECS + [BasisSpec("Bernstein", 0)], ids=str)
def test_basis_functions_integrate_to_one(spec):
    b = build_basis(spec)
    breaks = np.linspace(0, 1, 21)
    for k in range(b.size):
        val = sum(integrate.quad(lambda x: b.eval(np.array([x]))[0, k], lo, hi, epsabs=1e-13)[0]
                  for lo, hi in zip(breaks[:-1], breaks[1:]))
        assert val == pytest.approx(1.0, abs=1e-10)
    x = np.linspace(0, 1, 33)
    assert_allclose(b.eval(x) @ b.weights(), 1.0, atol=1e-12)


def test_bernstein_degree_zero_is_constant():
    assert_allclose(build_basis(BasisSpec("Bernstein", 0)).eval(np.linspace(0, 1, 5)), 1.0)


def test_quadratic_spline_c1_at_knots():
    b = build_basis(BasisSpec("BSpline", 5, 2))
    eps = 1e-7
    for t in (0.2, 0.4, 0.6, 0.8):
        left = (b.eval([t]) - b.eval([t - eps])) / eps
        right = (b.eval([t + eps]) - b.eval([t])) / eps
        assert_allclose(left, right, atol=1e-4)


def test_margin_constraints():
    A, rhs = build_margin_constraints(BasisSpec("Bernstein", 1))
    assert_allclose(A @ np.full(4, 0.25), rhs, atol=1e-15)
    assert_allclose(rhs[1:], 0.5)
    spec = BasisSpec("BSpline", 2, 1)
    A, rhs = build_margin_constraints(spec)
    w = build_basis(spec).weights()
    assert_allclose(A @ np.outer(w, w).ravel(), rhs, atol=1e-14)
    assert_allclose(rhs, 1.0)
    for spec in SPECS:
        A, _ = build_margin_constraints(spec)
        assert np.linalg.matrix_rank(A) < A.shape[0]


def test_constraint_points():
    assert_allclose(constraint_points(BasisSpec("BSpline", 4, 1)), [0, 0.25, 0.5, 0.75, 1])
    assert_allclose(constraint_points(BasisSpec("BSpline", 4, 2)),
                    [0, 0.125, 0.375, 0.625, 0.875, 1])


def test_first_difference_matrix_layout():
    expected = np.array([[1, -1, 0, 0, 0], [0, 1, -1, 0, 0], [0, 0, 1, -1, 0], [0, 0, 0, 1, -1]])
    assert_allclose(difference_matrix(5, 1), expected)
    assert_allclose(difference_matrix(5, 2),
                    [[1, -2, 1, 0, 0], [0, 1, -2, 1, 0], [0, 0, 1, -2, 1]])


@pytest.mark.parametrize("spec", SPECS, ids=str)
def test_penalty_psd_and_null_on_constants(spec):
    P = build_penalty(spec)
    assert_allclose(P, P.T)
    assert linalg.eigvalsh(P).min() >= -1e-12 * max(1.0, np.abs(P).max())
    ones = np.ones(P.shape[0])
    assert abs(ones @ P @ ones) <= 1e-9 * np.abs(P).max()


def test_bernstein_penalty_matches_quadrature():
    # v'Pv equals the integrated squared second partial derivatives
    spec = BasisSpec("Bernstein", 3)
    b = build_basis(spec)
    rng = np.random.default_rng(0)
    V = rng.normal(size=(4, 4))
    x, w = np.polynomial.legendre.leggauss(20)
    x, w = 0.5 * (x + 1), 0.5 * w
    B, B2 = b.eval(x), b.deriv2(x)
    d11 = B2 @ V @ B.T
    d22 = B @ V @ B2.T
    oracle = w @ (d11 ** 2 + d22 ** 2) @ w
    assert V.ravel() @ build_penalty(spec) @ V.ravel() == pytest.approx(oracle, rel=1e-10)


def test_effective_df_limits(rng):
    M = 9
    X = rng.normal(size=(50, M))
    H = X.T @ X
    P = build_penalty(BasisSpec("BSpline", 2, 1))
    Z = linalg.null_space(np.ones((1, M)))
    assert effective_df(H, P, 0.0, Z) == pytest.approx(Z.shape[1], abs=1e-6)
    grid = np.logspace(-8, 8, 9)
    edf = [effective_df(H, P, lam, Z) for lam in grid]
    assert all(a >= b - 1e-9 for a, b in zip(edf, edf[1:]))
    assert edf[-1] < edf[0]


@pytest.mark.parametrize("tag", ["pbern", "pspl1", "pspl2"])
def test_constraints_and_selection(tag, rng):
    u, v = gauss_pair_sample(300, rng)
    spec = BasisSpec.default(tag)
    spec = BasisSpec(spec.kind, 8 if tag != "pspl2" else 6, spec.q)
    fit = fit_penalized(u, v, spec)
    A, rhs = build_margin_constraints(spec)
    assert np.max(np.abs(A @ fit.coeffs.ravel() - rhs)) <= 1e-8
    assert np.all(fit.coeffs >= 0)
    caics = [c for _, c, _ in fit.lambda_path]
    assert fit.caic <= min(caics) + 1e-9
    assert fit.loglik >= -1e-9
    assert 0 < fit.edf <= (spec.K + 1 + spec.q) ** 2
    g = np.linspace(0.05, 0.95, 19)
    assert fd_density_error(fit, g) <= 1e-4 * max(1.0, fit.pdf(g, g).max())
    assert_allclose(fit.hfunc1(np.array([0.0, 1.0]), 0.3), [0.0, 1.0], atol=1e-10)


def test_uniform_coefficients_give_identity_h():
    for spec in SPECS:
        w = build_basis(spec).weights()
        fit = PenalizedCopula(spec, np.outer(w, w), 1.0, 1.0)
        u = np.linspace(0, 1, 11)
        assert_allclose(fit.pdf(u, u[::-1]), 1.0, atol=1e-12)
        assert_allclose(fit.hfunc1(u, 0.37), u, atol=1e-12)


def test_bspline_margins_by_quadrature(rng):
    u, v = gauss_pair_sample(400, rng)
    for q, K in ((1, 8), (2, 6)):
        spec = BasisSpec("BSpline", K, q)
        fit = fit_penalized(u, v, spec)
        x, w = np.polynomial.legendre.leggauss(40)
        pieces = np.linspace(0, 1, K + 1)
        xs = np.concatenate([0.5 * (b - a) * x + 0.5 * (a + b) for a, b in zip(pieces, pieces[1:])])
        ws = np.concatenate([0.5 * (b - a) * w for a, b in zip(pieces, pieces[1:])])
        kappa = constraint_points(spec)
        at_kappa = [ws @ fit.pdf(xs, np.full_like(xs, t)) for t in kappa]
        anywhere = [ws @ fit.pdf(xs, np.full_like(xs, t)) for t in np.linspace(0, 1, 101)]
        assert_allclose(at_kappa, 1.0, atol=1e-3)
        assert_allclose(anywhere, 1.0, atol=2e-2)


def test_independent_data_is_nearly_uniform():
    g = np.linspace(0.05, 0.95, 19)
    U, V = np.meshgrid(g, g)
    devs = {"pbern": [], "pspl1": [], "pspl2": []}
    for r in range(5):
        x = np.random.default_rng(100 + r).random((2000, 2))
        devs["pbern"].append(np.abs(fit_pbern(x[:, 0], x[:, 1]).pdf(U, V) - 1).max())
        devs["pspl1"].append(np.abs(fit_pspl(x[:, 0], x[:, 1], 1).pdf(U, V) - 1).max())
        devs["pspl2"].append(np.abs(fit_pspl(x[:, 0], x[:, 1], 2).pdf(U, V) - 1).max())
    # the penalty null spaces contain low-order polynomial tilts, so the
    # heavily penalized fit is close to, not identical with, independence
    assert np.median(devs["pbern"]) <= 0.1
    assert np.median(devs["pspl1"]) <= 0.1
    assert np.median(devs["pspl2"]) <= 0.2


def test_pspl2_beats_constant_density_on_gaussian(rng):
    truth = pair_truth()
    iae_fit, iae_one = [], []
    for _ in range(20):
        u, v = gauss_pair_sample(2000, rng)
        fit = fit_pspl(u, v, 2)
        U, c = importance_sample(truth, 1000, rng)
        iae_fit.append(measures_from_values(fit.pdf(U[:, 0], U[:, 1]), c)[0])
        iae_one.append(measures_from_values(np.ones(len(c)), c)[0])
    assert np.median(iae_fit) < np.median(iae_one)


def test_serialization_roundtrip(rng):
    u, v = gauss_pair_sample(200, rng)
    fit = fit_pspl(u, v, 1, K=5)
    back = PenalizedCopula.from_dict(fit.to_dict())
    g = np.linspace(0.1, 0.9, 5)
    assert_allclose(back.pdf(g, g[::-1]), fit.pdf(g, g[::-1]))
    assert back.edf == fit.edf and back.lam == fit.lam and back.estimator == "pspl1"
