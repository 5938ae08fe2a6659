"""
Nonparametric estimation of simplified vine copulas.

Pair-copula estimators (parametric, empirical Bernstein, penalized Bernstein
and B-spline, transformation local likelihood), R-vine structure selection
and sequential fitting, a simulation study harness and a command-line
interface.
"""
from .core import kendalls_tau, pseudo_obs, spearmans_rho
from .families import FamilySpec, fit_parametric, spec_from_tau, tau_to_param
from .vine import (CRITERIA, ESTIMATORS, Edge, RVineStructure, Vine, VineModel, fit_pair,
                   fit_sequential, select_structure_and_fit, validate_structure)

__version__ = "0.1.0"

__all__ = [
    "CRITERIA", "ESTIMATORS", "Edge", "FamilySpec", "RVineStructure", "Vine", "VineModel",
    "fit_pair", "fit_parametric", "fit_sequential", "kendalls_tau", "pseudo_obs",
    "select_structure_and_fit", "spearmans_rho", "spec_from_tau", "tau_to_param",
    "validate_structure",
]
