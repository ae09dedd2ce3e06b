"""Cross-module invariants checked on random inputs."""

import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from estimandkit import (Dataset, Estimand, MatchSpec, Pipeline, cem, fine_stratification, fit_logistic,
                         full_matching, g_computation, greedy_nn, hajek_contrast, ipw_ate, match_to_weights,
                         matching_weights, optimal_pair, overlap_ato, smd, smr, stratified_estimate)
from estimandkit.errors import EstimandRelabelWarning, ValidationError

from conftest import random_dataset, random_scores_instance

seeds = st.integers(0, 2**31)


def discrete_dataset(seed, levels):
    """One discrete covariate with every level holding both groups."""
    rng = np.random.default_rng(seed)
    while True:
        x = rng.integers(0, levels, 120).astype(float)
        p = rng.uniform(0.2, 0.8, levels)
        t = (rng.random(120) < p[x.astype(int)]).astype(float)
        ok = all(0 < t[x == k].sum() < (x == k).sum() for k in range(levels))
        if ok:
            break
    y = 3 * x + (1 + x) * t + rng.normal(size=120)
    dummies = np.column_stack([(x == k).astype(float) for k in range(1, levels)])
    return Dataset(dummies, t, tuple(f"x{k}" for k in range(1, levels)), y), x


@settings(max_examples=20, deadline=None)
@given(seeds, st.integers(2, 4), st.sampled_from(["ATE", "ATT", "ATU"]))
def test_triple_agreement_on_saturated_problems(seed, levels, target):
    data, x = discrete_dataset(seed, levels)
    e = fit_logistic(data).scores
    w = ipw_ate(e, data.treatment) if target == "ATE" else smr(e, data.treatment, target)
    ms = cem(data)
    a = hajek_contrast(data, w).point
    b = stratified_estimate(data, ms, target).point
    c = g_computation(data, target).point
    assert a == pytest.approx(b, abs=1e-8) and b == pytest.approx(c, abs=1e-8)


@settings(max_examples=15, deadline=None)
@given(seeds, st.integers(2, 4))
def test_cem_smr_stratified_att_coincide(seed, levels):
    data, _ = discrete_dataset(seed, levels)
    ms = cem(data)
    cem_att = hajek_contrast(data, match_to_weights(ms, "att", data.treatment)).point
    smr_att = hajek_contrast(data, smr(fit_logistic(data).scores, data.treatment)).point
    assert cem_att == pytest.approx(smr_att, abs=1e-8)
    assert cem_att == pytest.approx(stratified_estimate(data, ms, "att").point, abs=1e-8)


@settings(max_examples=25, deadline=None)
@given(seeds, st.floats(0.01, 100.0))
def test_weight_scaling_leaves_smd_and_estimates(seed, c):
    data = random_dataset(np.random.default_rng(seed), n=50)
    w = overlap_ato(fit_logistic(data).scores, data.treatment)
    for name in data.covariate_names:
        assert smd(data, name, w) == pytest.approx(smd(data, name, w.scaled(c)), abs=1e-10)
    assert hajek_contrast(data, w).point == pytest.approx(hajek_contrast(data, w.scaled(c)).point, abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(seeds, st.floats(-1e3, 1e3))
def test_location_equivariance(seed, c):
    data = random_dataset(np.random.default_rng(seed), n=50)
    shifted = data.with_outcome(data.outcome + c)
    for method, target in (("ipw", "ate"), ("smr-weights", "att"), ("overlap-weights", "ato")):
        p = Pipeline(method)
        assert p(data, target).point == pytest.approx(p(shifted, target).point, abs=1e-8)


@given(seeds)
def test_randomized_trial_degeneracy(seed):
    rng = np.random.default_rng(seed)
    t = np.r_[1.0, 0.0, (rng.random(18) < 0.5)]
    data = Dataset(np.zeros((20, 0)), t, (), rng.normal(size=20))
    e = np.full(20, 0.5)
    ests = [hajek_contrast(data, w).point
            for w in (ipw_ate(e, t), smr(e, t), smr(e, t, "atu"), overlap_ato(e, t), matching_weights(e, t))]
    assert np.allclose(ests, ests[0], atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seeds, st.one_of(st.none(), st.floats(0.05, 1.0)))
def test_att_weights_treated_zero_or_one(seed, caliper):
    rng = np.random.default_rng(seed)
    data, e = random_scores_instance(rng, 5, 9)
    for fn in (greedy_nn, optimal_pair):
        try:
            ms = fn(data, e, MatchSpec(caliper=caliper))
        except ValidationError:
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", EstimandRelabelWarning)
            w = match_to_weights(ms, "att", data.treatment)
        assert set(np.unique(w.weights[data.treatment == 1])) <= {0.0, 1.0}


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_matching_is_deterministic(seed):
    data = random_dataset(np.random.default_rng(seed), n=40, outcome=False)
    if data.treatment.sum() > 20:
        data = data.with_treatment(1 - data.treatment)
    e = fit_logistic(data).scores
    for run in (lambda: greedy_nn(data, e, MatchSpec()),
                lambda: optimal_pair(data, e, MatchSpec()),
                lambda: full_matching(data, e)):
        a, b = run(), run()
        assert a == b and a.distance == b.distance
