"""Shared fixtures for density tests: samplers and simple truths."""
import numpy as np

from npvine.evaluation import importance_measures
from npvine.families import FamilySpec, sample_pair
from npvine.simulation import TrueVineModel
from npvine.vine import Edge, RVineStructure

GAUSS = FamilySpec("Gaussian", 0, 0.7071)
PAIR = RVineStructure([[Edge(1, 2)]])


def pair_truth(spec=GAUSS):
    return TrueVineModel(PAIR, {Edge(1, 2): spec})


def pair_iae(fit, truth, rng, N=1000):
    """IAE of a fitted pair-copula against a two-dimensional truth."""
    est = lambda U: fit.pdf(U[:, 0], U[:, 1])
    return importance_measures(est, truth, N, rng)["iae"]


def gauss_pair_sample(n, rng, spec=GAUSS):
    x = sample_pair(spec, n, rng)
    return x[:, 0], x[:, 1]


def fd_density_error(fit, grid, eps=1e-6):
    """Max gap between central differences of both h-functions and the density."""
    U, V = np.meshgrid(grid, grid, indexing="ij")
    c = fit.pdf(U, V)
    d1 = (fit.hfunc1(U + eps, V) - fit.hfunc1(U - eps, V)) / (2 * eps)
    d2 = (fit.hfunc2(U, V + eps) - fit.hfunc2(U, V - eps)) / (2 * eps)
    return max(np.max(np.abs(d1 - c)), np.max(np.abs(d2 - c)))
