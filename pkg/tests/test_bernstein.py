import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose
from scipy import integrate, optimize

from npvine.bernstein import (BernsteinBasis, BernsteinCopula, bernstein_basis,
                              bernstein_margin_constraints, cell_frequencies, fit_bern,
                              project_coefficients, select_K)

from npvine.evaluation import importance_sample, measures_from_values

from helpers import fd_density_error, gauss_pair_sample, pair_truth


def test_basis_examples():
    assert_allclose(bernstein_basis(0, 0, np.linspace(0, 1, 5)), 1.0)
    assert bernstein_basis(1, 0, 0.0) == 2.0
    for k in range(6):
        val = integrate.quad(lambda u: bernstein_basis(5, k, u), 0, 1)[0]
        assert val == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        bernstein_basis(3, 4, 0.5)


def test_basis_cdf_and_second_derivative():
    b = BernsteinBasis(6)
    x = np.linspace(0.05, 0.95, 7)
    eps = 1e-6
    assert_allclose((b.cdf(x + eps) - b.cdf(x - eps)) / (2 * eps), b.eval(x), atol=1e-6)
    eps = 1e-4
    fd2 = (b.eval(x + eps) - 2 * b.eval(x) + b.eval(x - eps)) / eps ** 2
    assert_allclose(b.deriv2(x), fd2, rtol=1e-5, atol=1e-3)
    assert_allclose(b.eval(x) @ b.weights(), 1.0)


def test_select_K_examples():
    assert select_K(400, 0.0) == 1
    oracle = lambda n, r: int(np.floor(n ** (1 / 3) * np.exp(r ** (1 / n)) * (r + 0.1)))
    assert select_K(1000, 0.5) == oracle(1000, 0.5) == 16
    assert select_K(1000, 0.9) == oracle(1000, 0.9) == 27
    assert select_K(1000, -0.5) == 16


def test_cell_boundaries():
    f = cell_frequencies(np.array([0.5, 1.0, 0.0, 0.25]), np.array([0.5, 1.0, 0.0, 0.75]), 1)
    # 0.5 is a boundary -> lower cell; 1.0 -> last cell; 0.0 -> first cell
    assert_allclose(f, [[0.5, 0.25], [0.0, 0.25]])


def test_uniform_grid_data_gives_independence():
    g = (np.arange(20) + 0.5) / 20
    U, V = np.meshgrid(g, g)
    fit = fit_bern(U.ravel(), V.ravel(), K=1)
    assert_allclose(fit.coeffs, 0.25, atol=1e-12)
    assert_allclose(fit.pdf(np.random.rand(50), np.random.rand(50)), 1.0, atol=1e-12)


def test_uniform_coefficients_h_is_identity():
    fit = BernsteinCopula(4, np.full((5, 5), 1 / 25))
    u = np.linspace(0, 1, 11)
    assert_allclose(fit.hfunc1(u, 0.3), u, atol=1e-12)
    assert_allclose(fit.hfunc2(0.3, u), u, atol=1e-12)


def test_projection_matches_generic_solver():
    rng = np.random.default_rng(5)
    target = rng.dirichlet(np.ones(9)).reshape(3, 3) + rng.normal(0, 0.05, (3, 3))
    coeffs, _ = project_coefficients(target, 2)
    A, rhs = bernstein_margin_constraints(2)
    # drop the redundant rows so the generic solver sees a full-rank system
    A, rhs = A[1:-1], rhs[1:-1]
    cons = [{"type": "eq", "fun": lambda x: A @ x - rhs}]
    ref = optimize.minimize(lambda x: np.sum((x - target.ravel()) ** 2), np.full(9, 1 / 9),
                            jac=lambda x: 2 * (x - target.ravel()), bounds=[(0, None)] * 9,
                            constraints=cons, method="SLSQP", options={"ftol": 1e-14})
    assert_allclose(coeffs.ravel(), ref.x, atol=1e-6)


@given(st.integers(0, 2 ** 31 - 1), st.integers(10, 300))
def test_fit_constraints_hold(seed, n):
    rng = np.random.default_rng(seed)
    u, v = gauss_pair_sample(n, rng)
    fit = fit_bern(u, v)
    K = fit.K
    assert np.all(fit.coeffs >= 0)
    assert fit.coeffs.sum() == pytest.approx(1.0, abs=1e-10)
    assert_allclose(fit.coeffs.sum(axis=0), 1 / (K + 1), atol=1e-8)
    assert_allclose(fit.coeffs.sum(axis=1), 1 / (K + 1), atol=1e-8)
    assert fit.edf == (K + 1) ** 2 - (2 * K + 1) - 1


def test_margins_integrate_to_one(rng):
    u, v = gauss_pair_sample(500, rng)
    fit = fit_bern(u, v)
    x, w = np.polynomial.legendre.leggauss(60)
    x, w = 0.5 * (x + 1), 0.5 * w
    g = np.linspace(0, 1, 101)
    m1 = np.array([w @ fit.pdf(x, np.full_like(x, t)) for t in g])
    m2 = np.array([w @ fit.pdf(np.full_like(x, t), x) for t in g])
    assert_allclose(m1, 1.0, atol=1e-8)
    assert_allclose(m2, 1.0, atol=1e-8)


def test_hfunc_consistency(rng):
    u, v = gauss_pair_sample(800, rng)
    fit = fit_bern(u, v)
    g = np.linspace(0.05, 0.95, 19)
    assert fd_density_error(fit, g) <= 1e-4 * max(1.0, fit.pdf(g, g).max())
    assert_allclose(fit.hfunc1(np.array([0.0, 1.0]), 0.4), [0.0, 1.0], atol=1e-12)
    assert np.all(np.diff(fit.hfunc1(np.linspace(0, 1, 50), 0.7)) >= -1e-12)


def test_beats_constant_density_on_gaussian(rng):
    truth = pair_truth()
    iae_fit, iae_one = [], []
    for _ in range(20):
        u, v = gauss_pair_sample(2000, rng)
        fit = fit_bern(u, v)
        U, c = importance_sample(truth, 1000, rng)
        iae_fit.append(measures_from_values(fit.pdf(U[:, 0], U[:, 1]), c)[0])
        iae_one.append(measures_from_values(np.ones(len(c)), c)[0])
    assert np.median(iae_fit) < np.median(iae_one)


def test_serialization_roundtrip(rng):
    u, v = gauss_pair_sample(200, rng)
    fit = fit_bern(u, v)
    back = BernsteinCopula.from_dict(fit.to_dict())
    g = np.linspace(0.1, 0.9, 5)
    assert_allclose(back.pdf(g, g[::-1]), fit.pdf(g, g[::-1]))
    assert back.edf == fit.edf


def test_needs_ten_observations():
    with pytest.raises(ValueError):
        fit_bern(np.full(5, 0.5), np.full(5, 0.5))
