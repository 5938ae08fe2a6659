import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose
from scipy import stats

from npvine.evaluation import (AccuracyRecord, average_ranks, hellinger_importance,
                               iae_importance, importance_measures, importance_sample,
                               kl_importance, measures_from_values, oos_loglik, read_records,
                               scenario_medians, scenario_ranks, timed, timing_capture,
                               write_records)
from npvine.families import FamilySpec, independence_copula, logpdf
from npvine.simulation import TrueVineModel, draw_structure, independence_model
from npvine.vine import Edge, RVineStructure, VineModel, fit_pair

from helpers import GAUSS, gauss_pair_sample, pair_truth

THETA = 0.7071


def _z_grid(m=500, lim=8.0):
    z = np.linspace(-lim, lim, m)
    w = np.full(m, z[1] - z[0])
    w[[0, -1]] /= 2
    Z1, Z2 = np.meshgrid(z, z, indexing="ij")
    return Z1, Z2, np.outer(w, w)


def _gauss_quadrature(fun):
    """Integral over the unit square of fun(c) where c is the Gaussian copula
    density, computed in normal scale on a 500 x 500 trapezoid grid."""
    Z1, Z2, W = _z_grid()
    r = THETA
    phi2 = np.exp(-(Z1 ** 2 - 2 * r * Z1 * Z2 + Z2 ** 2) / (2 * (1 - r * r))) / (
        2 * np.pi * np.sqrt(1 - r * r))
    prod = stats.norm.pdf(Z1) * stats.norm.pdf(Z2)
    c = phi2 / prod
    return float(np.sum(W * prod * fun(c)))


def test_quadrature_oracle_is_sound():
    assert_allclose(_gauss_quadrature(lambda c: c), 1.0, atol=1e-8)
    assert_allclose(_gauss_quadrature(lambda c: c * np.log(c)),
                    -0.5 * np.log(1 - THETA ** 2), rtol=1e-6)


def test_identity_gives_zero():
    truth = pair_truth()
    m = importance_measures(truth, truth, 2000, np.random.default_rng(0))
    assert m == {"iae": 0.0, "hellinger": 0.0, "kl": 0.0}


def test_constant_vs_independence_gives_zero():
    truth = independence_model(RVineStructure([[Edge(1, 2)], ]))
    m = importance_measures(1.0, truth, 500, np.random.default_rng(0))
    assert m == {"iae": 0.0, "hellinger": 0.0, "kl": 0.0}


def test_iae_matches_quadrature():
    oracle = _gauss_quadrature(lambda c: np.abs(1 - c))
    truth = pair_truth()
    import time
    t0 = time.perf_counter()
    est = iae_importance(1.0, truth, 100_000, np.random.default_rng(1))
    assert time.perf_counter() - t0 < 10
    assert abs(est / oracle - 1) <= 0.05


def test_kl_matches_quadrature():
    oracle = _gauss_quadrature(lambda c: c * np.log(c))
    est = kl_importance(1.0, pair_truth(), 100_000, np.random.default_rng(2))
    assert abs(est / oracle - 1) <= 0.05


def test_hellinger_matches_quadrature():
    oracle = np.sqrt(_gauss_quadrature(lambda c: (1 - np.sqrt(c)) ** 2 / 2))
    est = hellinger_importance(1.0, pair_truth(), 100_000, np.random.default_rng(3))
    assert abs(est / oracle - 1) <= 0.05


@given(st.lists(st.floats(0, 1e6), min_size=1, max_size=50), st.integers(0, 2 ** 32 - 1))
def test_measures_nonnegative(c_hat, seed):
    c = np.random.default_rng(seed).uniform(1e-3, 50, size=len(c_hat))
    iae, hel, _ = measures_from_values(np.array(c_hat), c)
    assert iae >= 0 and hel >= 0


@given(st.sampled_from(["Gaussian", "Clayton", "Gumbel", "Frank"]), st.floats(-0.85, 0.85),
       st.integers(0, 2 ** 32 - 1))
def test_density_estimates_respect_bounds(family, tau, seed):
    from npvine.families import pdf, spec_from_tau
    spec = spec_from_tau(family, tau, rotation=0)
    est = lambda U: pdf(spec, U[:, 0], U[:, 1])
    m = importance_measures(est, pair_truth(), 2000, np.random.default_rng(seed))
    assert 0 <= m["hellinger"] <= math.sqrt(2)
    assert m["iae"] >= 0 and m["kl"] >= -0.05


def test_zero_estimate_is_floored():
    iae, hel, kl = measures_from_values(np.zeros(3), np.ones(3))
    assert iae == 1.0 and math.isfinite(kl) and kl > 600


def test_truth_underflow_clamped():
    iae, _, _ = measures_from_values(np.ones(2), np.zeros(2))
    assert math.isfinite(iae)


def test_iae_error_scales_with_sample_size():
    # the estimate must keep the importance weights square integrable; with
    # c_hat = 1 and this truth the variance is infinite
    from npvine.families import pdf
    near = lambda U: pdf(FamilySpec("Gaussian", 0, 0.6), U[:, 0], U[:, 1])
    truth = pair_truth()
    rng = np.random.default_rng(4)

    def spread(N):
        return np.std([iae_importance(near, truth, N, rng) for _ in range(200)], ddof=1)

    ratio = spread(10_000) / spread(2500)
    # 1/sqrt(N) scaling predicts a ratio of 0.5
    assert 0.35 <= ratio <= 0.65


def test_importance_sample_rejects_empty():
    with pytest.raises(ValueError):
        importance_sample(pair_truth(), 0, np.random.default_rng(0))


# --- out-of-sample likelihood ------------------------------------------------

def test_oos_independence_is_zero():
    s = draw_structure(4, 50, np.random.default_rng(0))
    m = VineModel(s, {e: independence_copula() for e in s.edges}, "par")
    assert oos_loglik(m, np.random.default_rng(1).uniform(size=(100, 4))) == 0.0


def test_oos_truth_positive_and_pair_mean():
    truth = pair_truth()
    x = truth.sample(5000, np.random.default_rng(2))
    val = oos_loglik(truth, x)
    assert val > 0
    assert_allclose(val, np.mean(logpdf(GAUSS, x[:, 0], x[:, 1])), rtol=1e-12)
    # expectation is the negative copula entropy
    assert_allclose(val, -0.5 * np.log(1 - THETA ** 2), atol=0.03)


def test_oos_fitted_pair_model():
    u, v = gauss_pair_sample(500, np.random.default_rng(3))
    fit = fit_pair(u, v, "tll0")
    m = VineModel(RVineStructure([[Edge(1, 2)]]), {Edge(1, 2): fit}, "tll0")
    test = np.column_stack(gauss_pair_sample(300, np.random.default_rng(4)))
    assert_allclose(oos_loglik(m, test), np.mean(np.log(fit.pdf(test[:, 0], test[:, 1]))))


# --- ranks ------------------------------------------------------------------------

def _rec(s, e, iae, mode="tau", rep=0):
    return AccuracyRecord(s, e, mode, rep, iae, 0.0, 0.0, 1.0, 0.1)


def test_one_estimator_wins_everywhere():
    recs = [_rec("s1", "a", 0.1), _rec("s1", "b", 0.2), _rec("s2", "a", 0.3), _rec("s2", "b", 0.4)]
    assert average_ranks(recs) == {"a": 1.0, "b": 2.0}


def test_ties_get_average_rank():
    recs = [_rec("s1", "a", 0.1), _rec("s1", "b", 0.1), _rec("s1", "c", 0.5)]
    assert average_ranks(recs) == {"a": 1.5, "b": 1.5, "c": 3.0}


def test_means_over_reps_and_modes():
    recs = [_rec("s", "a", 0.1, "tau", 0), _rec("s", "a", 0.5, "caic", 1),
            _rec("s", "b", 0.2, "tau", 0), _rec("s", "b", 0.2, "caic", 1)]
    assert average_ranks(recs) == {"a": 2.0, "b": 1.0}


def _hand_ranks(table):
    """Rank each column by counting smaller entries (ties split)."""
    out = {}
    for s, row in table.items():
        for e, x in row.items():
            less = sum(y < x for y in row.values())
            equal = sum(y == x for y in row.values())
            out.setdefault(e, []).append(less + (equal + 1) / 2)
    return {e: sum(v) / len(v) for e, v in out.items()}


def test_eight_estimator_table_matches_hand_ranking():
    ests = ["par", "bern", "pbern", "pspl1", "pspl2", "tll0", "tll1", "tll2"]
    rng = np.random.default_rng(5)
    table = {f"s{i}": {e: float(np.round(rng.uniform(0.1, 1.0), 2)) for e in ests}
             for i in range(8)}
    recs = [_rec(s, e, x) for s, row in table.items() for e, x in row.items()]
    assert average_ranks(recs) == pytest.approx(_hand_ranks(table))


@given(st.lists(st.floats(0.01, 10), min_size=12, max_size=12),
       st.sampled_from([np.log, np.sqrt, lambda x: x ** 3, lambda x: -1 / x]))
def test_ranks_invariant_under_monotone_transform(vals, f):
    ests = ["a", "b", "c", "d"]
    recs = [_rec(f"s{i // 4}", ests[i % 4], x) for i, x in enumerate(vals)]
    recs_t = [_rec(r.scenario, r.estimator, float(f(r.iae))) for r in recs]
    assert average_ranks(recs) == average_ranks(recs_t)


def test_missing_estimator_scenario_skipped():
    recs = [_rec("s1", "a", 0.1), _rec("s1", "b", 0.2), _rec("s2", "a", 0.3)]
    with pytest.warns(UserWarning, match="s2"):
        per = scenario_ranks(recs)
    assert list(per) == ["s1"]


def test_nan_records_ignored():
    recs = [_rec("s1", "a", 0.1), _rec("s1", "a", float("nan"), rep=1), _rec("s1", "b", 0.2)]
    assert average_ranks(recs) == {"a": 1.0, "b": 2.0}


def test_scenario_medians():
    recs = [_rec("s", "a", x, rep=i) for i, x in enumerate([0.3, 0.1, 0.2])]
    assert scenario_medians(recs) == {("s", "a"): 0.2}


# --- timing and records -------------------------------------------------------------

def test_timing():
    assert timing_capture(lambda: None) < 1e-3
    u, v = gauss_pair_sample(400, np.random.default_rng(6))
    res, sec = timed(fit_pair, u, v, "par")
    assert sec > 0 and res.estimator == "par"


def test_pbern_slower_than_tll0():
    u, v = gauss_pair_sample(2000, np.random.default_rng(7))
    t_tll = timing_capture(fit_pair, u, v, "tll0")
    t_pb = timing_capture(fit_pair, u, v, "pbern")
    assert t_pb > t_tll


def test_records_csv_roundtrip(tmp_path):
    recs = [AccuracyRecord("s2", "b", "tau", 1, 0.1 + 1e-17, 0.2, -0.01, 1.5, 0.25),
            AccuracyRecord("s1", "a", "caic", 0, 1 / 3, float("nan"), 0.0, 2.0, 0.5)]
    path = tmp_path / "r.csv"
    write_records(path, recs)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(AccuracyRecord.header())
    assert lines[1].startswith("s1,a,caic,0,0.3333333333333333,nan")
    back = read_records(path)
    assert back[1] == recs[0]
    assert back[0].iae == recs[1].iae and math.isnan(back[0].hellinger)


@pytest.mark.parametrize("text", ["", "a,b\n", "scenario,estimator,structure_mode,rep,iae,"
                                  "hellinger,kl,fit_seconds,eval_seconds\ns,a,tau,x,1,1,1,1,1\n",
                                  "scenario,estimator,structure_mode,rep,iae,"
                                  "hellinger,kl,fit_seconds,eval_seconds\ns,a,tau,0,1\n"])
def test_malformed_records_rejected(text, tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(ValueError):
        read_records(path)
