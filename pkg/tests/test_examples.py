"""Worked examples on the ten-patient table and simple degenerate inputs."""

import math
import warnings

import numpy as np
import pytest

from estimandkit import (Dataset, Estimand, MatchSpec, Pipeline, PotentialOutcomeTable, TrimSpec, bootstrap,
                         cardinality_matching, cem, ess, fine_stratification, fit_logistic, full_matching,
                         g_computation, generate, greedy_nn, hajek_contrast, ipw_ate, logit, match_to_weights,
                         matching_weights, optimal_pair, overlap_ato, ratio_measures, smr, stratified_estimate,
                         subgroup_estimate, trim, true_estimands, validate)
from estimandkit.core import observed_from_potential
from estimandkit.errors import EstimandRelabelWarning, PerfectSeparationError, ValidationError
from estimandkit.simulation import DGPConfig, CovariateLaw, evaluate_bias

import oracles

X0 = [0, 1, 2, 4, 5]
X1 = [3, 6, 7, 8, 9]


@pytest.fixture
def fitted(t1):
    data, pot, _ = t1
    return data, pot, fit_logistic(data).scores


def test_core_examples(t1):
    data, pot, _ = t1
    assert validate(data) == []
    assert observed_from_potential(pot, data.treatment).tolist() == [80, 80, 60, 30, 40, 40, 70, 50, 80, 60]
    assert np.array_equal(observed_from_potential(pot, np.zeros(10)), pot.y0)
    same = PotentialOutcomeTable(pot.y0, pot.y0)
    assert np.array_equal(observed_from_potential(same, np.ones(10)), observed_from_potential(same, np.zeros(10)))


def test_propensity_examples():
    x = np.array([[0.0], [0.0], [1.0], [1.0]])
    m = fit_logistic(Dataset(x, [1, 0, 1, 0], ("x",)))
    assert np.allclose(m.scores, 0.5) and abs(m.coefficients[1]) < 1e-12
    with pytest.raises(PerfectSeparationError, match="stratification"):
        fit_logistic(Dataset(x, [0, 0, 1, 1], ("x",)))
    assert logit([0.5])[0] == 0.0
    assert logit([0.6])[0] == pytest.approx(0.405465, abs=1e-6)


def test_score_equations_hold(fitted):
    rng = np.random.default_rng(12)
    x = rng.normal(size=(150, 3))
    t = (rng.random(150) < 1 / (1 + np.exp(-x @ [0.5, -1.0, 0.3]))).astype(float)
    m = fit_logistic(Dataset(x, t, ("a", "b", "c")))
    assert m.converged
    resid = t - m.scores
    assert abs(resid.sum()) < 1e-8
    assert np.all(np.abs(x.T @ resid) < 1e-8)


def test_weight_examples(fitted):
    data, _, e = fitted
    t = data.treatment
    assert np.allclose(ipw_ate(e, t).weights, [1 / 0.6] * 3 + [5] + [2.5, 2.5] + [1.25] * 4)
    assert np.allclose(smr(e, t, "att").weights[4:], [1.5, 1.5, 0.25, 0.25, 0.25, 0.25])
    assert np.allclose(smr(e, t, "atu").weights[:4], [2 / 3, 2 / 3, 2 / 3, 4])
    assert np.allclose(overlap_ato(e, t).weights, [0.4, 0.4, 0.4, 0.8, 0.6, 0.6, 0.2, 0.2, 0.2, 0.2])
    assert np.allclose(matching_weights(e, t).weights, [2 / 3] * 3 + [1, 1, 1] + [0.25] * 4)
    assert hajek_contrast(data, matching_weights(e, t)).point == pytest.approx(58.889 - 48.333, abs=1e-3)
    half, tt = np.full(4, 0.5), np.array([1, 0, 1, 0])
    assert np.all(ipw_ate(half, tt).weights == 2)
    assert np.all(smr(half, tt).weights == 1)
    assert np.all(overlap_ato(half, tt).weights == 0.5)
    assert np.all(matching_weights(half, tt).weights == 1)
    low = np.array([0.1, 0.3, 0.2, 0.4])
    assert np.allclose(matching_weights(low, tt).weights[tt == 1], 1)


def test_trim_examples(fitted):
    data, _, e = fitted
    t = data.treatment
    w = ipw_ate(e, t)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EstimandRelabelWarning)
        assert np.array_equal(trim(w, TrimSpec.window(0.1, 0.9), t, e).weights, w.weights)
        cut = trim(w, TrimSpec.window(0.5, 0.9), t, e)
        assert np.all(cut.weights[X1] == 0) and cut.target is Estimand.ATO
        assert np.array_equal(trim(w, TrimSpec.cap(1.0), t, e).weights, w.weights)


def test_ess_examples(fitted):
    data, _, e = fitted
    assert ess(np.ones(6)) == pytest.approx(6)
    assert ess(ipw_ate(e, data.treatment), data.treatment, "untreated") == pytest.approx(100 / 18.75)
    assert ess([0, 0, 3.0]) == 1


def test_greedy_example(fitted):
    data, _, e = fitted
    ms = greedy_nn(data, e, MatchSpec())
    controls = sorted(data.outcome[s[1]] for s in ms.strata)
    assert controls == [40, 40, 50, 70]
    assert hajek_contrast(data, match_to_weights(ms, "att", data.treatment)).point == pytest.approx(12.5)
    with pytest.raises(ValidationError):
        MatchSpec(caliper=0)


def test_identical_scores_give_zero_distance():
    e = np.array([0.3, 0.7, 0.3, 0.7])
    d = Dataset(np.zeros((4, 1)), [1, 1, 0, 0], ("x",))
    assert greedy_nn(d, e, MatchSpec()).distance == 0
    assert optimal_pair(d, e, MatchSpec(method="optimal-pair")).distance == 0


def test_optimal_pair_example(fitted):
    data, _, e = fitted
    ms = optimal_pair(data, e, MatchSpec(method="optimal-pair"))
    assert ms.distance == pytest.approx(math.log(6), abs=1e-8)  # logit 0.6 - logit 0.2 = ln 6 = 1.79176


def test_full_matching_examples(fitted):
    data, _, e = fitted
    ms = full_matching(data, e)
    assert ms.strata == (tuple(sorted(X0)), tuple(X1)) and ms.distance == 0
    rng = np.random.default_rng(1)
    one = Dataset(np.zeros((6, 1)), [1, 0, 0, 0, 0, 0], ("x",))
    assert full_matching(one, rng.uniform(0.1, 0.9, 6)).strata == ((0, 1, 2, 3, 4, 5),)


def test_fine_stratification_examples(fitted):
    data, _, e = fitted
    assert fine_stratification(data, e, MatchSpec(strata_count=2)).strata == (tuple(X0), tuple(X1))
    assert fine_stratification(data, e, MatchSpec(strata_count=1)).strata == (tuple(range(10)),)
    distinct = np.linspace(0.1, 0.9, 6)
    d = Dataset(np.zeros((6, 1)), [1, 0, 1, 0, 1, 0], ("x",))
    with pytest.raises(ValidationError, match="no stratum"):
        fine_stratification(d, distinct, MatchSpec(strata_count=6))


def test_cem_examples(t1):
    data, _, _ = t1
    ms = cem(data)
    assert ms.strata == (tuple(X0), tuple(X1)) and ms.discarded == ()
    w = match_to_weights(ms, "att", data.treatment)
    assert hajek_contrast(data, w).point == pytest.approx(16.25)
    same = Dataset(np.ones((4, 2)), [1, 0, 1, 0], ("a", "b"))
    assert cem(same).strata == ((0, 1, 2, 3),)


def test_cardinality_examples(t1):
    data, _, _ = t1
    ms = cardinality_matching(data, MatchSpec(method="cardinality", tolerance=0.1))
    assert ms.strata[0] == oracles.brute_cardinality(data.covariates, data.treatment, 0.1)
    balanced = Dataset(np.array([[0.0], [1.0], [0.0], [1.0]]), [1, 1, 0, 0], ("x",))
    assert cardinality_matching(balanced, MatchSpec(method="cardinality", tolerance=0.01)).discarded == ()
    assert cardinality_matching(data, MatchSpec(method="cardinality", tolerance=math.inf)).discarded == ()


def test_match_to_weights_examples(fitted):
    data, _, e = fitted
    fine = fine_stratification(data, e, MatchSpec(strata_count=2))
    assert stratified_estimate(data, fine, "ate").point == pytest.approx(-5 / 6)
    single = fine_stratification(data, e, MatchSpec(strata_count=1))
    w = match_to_weights(single, "ate", data.treatment).weights
    t = data.treatment
    assert np.allclose(w[t == 1], 10 / 4) and np.allclose(w[t == 0], 10 / 6)


def test_diagnostics_examples(fitted):
    from estimandkit import overlap_report, smd
    data, _, e = fitted
    assert smd(data, "X") == pytest.approx(-0.8198, abs=1e-4)
    same = Dataset(np.array([[1.0], [2.0], [1.0], [2.0]]), [1, 1, 0, 0], ("x",))
    assert smd(same, "x") == 0
    assert all(overlap_report([0.3, 0.6, 0.3, 0.6], [1, 1, 0, 0]).feasible.values())


def test_estimation_examples(fitted):
    data, _, e = fitted
    assert g_computation(data, "att").point == pytest.approx(16.25)
    empty = Dataset(np.zeros((10, 0)), data.treatment, (), data.outcome)
    raw = data.outcome[data.treatment == 1].mean() - data.outcome[data.treatment == 0].mean()
    assert g_computation(empty, "ate").point == pytest.approx(raw)
    assert subgroup_estimate(data, lambda r: r["X"] == 1, Pipeline("ipw"), "ate").point == pytest.approx(-35)
    assert subgroup_estimate(data, np.ones(10, bool), Pipeline("ipw"), "ate").point == \
        pytest.approx(Pipeline("ipw")(data, "ate").point)


def test_ratio_examples():
    t = np.array([1, 1, 1, 1, 0, 0, 0, 0])
    y = np.array([1, 1, 0, 0, 1, 0, 0, 0])
    d = Dataset(np.zeros((8, 0)), t, (), y)
    w = ipw_ate(np.full(8, 0.5), t)
    assert ratio_measures(d, w, "risk-ratio").point == pytest.approx(2)
    assert ratio_measures(d, w, "odds-ratio").point == pytest.approx(3)
    flat = d.with_outcome(np.array([1, 0, 1, 0, 1, 0, 1, 0]))
    assert ratio_measures(flat, w).point == 1 and ratio_measures(flat, w, "odds-ratio").point == 1
    swapped = d.with_treatment(1 - t)
    assert ratio_measures(swapped, ipw_ate(np.full(8, 0.5), 1 - t)).point == pytest.approx(0.5)


def test_bootstrap_examples(t1):
    data, _, _ = t1
    res = bootstrap(data, Pipeline("smr-weights"), 2000, 1, "att")
    assert res.se > 0 and res.interval[0] <= 16.25 <= res.interval[1]
    flat = data.with_outcome(np.full(10, 3.0))
    assert bootstrap(flat, Pipeline("smr-weights"), 20, 1, "att").se == 0


def test_simulation_examples(t1):
    data, pot, scores = t1
    assert true_estimands(pot, data.treatment, scores)[Estimand.ATO] == pytest.approx(7.2)
    flat = PotentialOutcomeTable(np.full(10, 4.0), np.zeros(10))
    assert set(true_estimands(flat, data.treatment, scores).values()) == {4.0}
    quiet = DGPConfig(n=50, covariates=(CovariateLaw("normal"),), treatment_coefs=(1.0,), noise_sd=0.0,
                      baseline_intercept=3.0)
    _, p, _ = generate(quiet)
    assert np.array_equal(p.y1, p.y0)
    res = evaluate_bias(quiet, Pipeline("ipw"), "ate", 3, 0)
    assert np.all(res.estimates == 0) and res.mean_bias == 0
