import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from estimandkit import Estimand, TrimSpec, ess, ipw_ate, matching_weights, overlap_ato, smr, trim
from estimandkit.errors import EstimandRelabelWarning, IncompatibleEstimandError, ValidationError
from estimandkit.weighting import weights_for

scores_st = arrays(float, st.integers(2, 30), elements=st.floats(0.01, 0.99))


def _t(e):
    t = (np.arange(e.size) % 2).astype(float)
    return t


@given(scores_st)
def test_weight_formulas(e):
    t = _t(e)
    tr = t == 1
    assert np.allclose(ipw_ate(e, t).weights, np.where(tr, 1 / e, 1 / (1 - e)))
    att = smr(e, t, "att").weights
    assert np.all(att[tr] == 1.0)
    assert np.allclose(att[~tr], e[~tr] / (1 - e[~tr]))
    atu = smr(e, t, "atu").weights
    assert np.all(atu[~tr] == 1.0)
    assert np.allclose(overlap_ato(e, t).weights, np.where(tr, 1 - e, e))
    mw = matching_weights(e, t).weights
    assert np.all(mw <= 1.0 + 1e-12) and np.all(mw > 0)


@given(scores_st)
def test_ipw_is_overlap_times_inverse_tilt(e):
    t = _t(e)
    assert np.allclose(ipw_ate(e, t).weights * e * (1 - e), overlap_ato(e, t).weights)


def test_targets():
    e, t = np.array([0.3, 0.6]), np.array([1, 0])
    assert ipw_ate(e, t).target is Estimand.ATE
    assert smr(e, t).target is Estimand.ATT
    assert overlap_ato(e, t).target is Estimand.ATO
    assert matching_weights(e, t).target is Estimand.ATO
    with pytest.raises(IncompatibleEstimandError):
        smr(e, t, "ate")
    assert weights_for("smr-weights", e, t, Estimand.ATU).target is Estimand.ATU


def test_scores_on_the_boundary_rejected():
    with pytest.raises(ValidationError, match="offending units"):
        ipw_ate([0.0, 0.5], [1, 0])


@given(arrays(float, st.integers(1, 40), elements=st.floats(0.0, 100.0)))
def test_ess_bounds(w):
    if not np.any(w > 0):
        return
    k = ess(w)
    assert 1 - 1e-9 <= k <= np.count_nonzero(w) + 1e-9


@given(arrays(float, st.integers(1, 40), elements=st.floats(0.01, 100.0)), st.floats(0.01, 100))
def test_ess_scale_invariant(w, c):
    assert np.isclose(ess(w), ess(c * w), rtol=1e-9)


def test_ess_equal_weights():
    assert ess(np.full(7, 2.5)) == pytest.approx(7.0)
    assert ess([1, 1, 3], [1, 0, 0], "untreated") == pytest.approx(16 / 10)


def test_window_trim_relabels_and_zeroes():
    e = np.array([0.05, 0.3, 0.5, 0.95, 0.4, 0.6])
    t = np.array([1, 1, 1, 0, 0, 0])
    with pytest.warns(EstimandRelabelWarning, match="ATE -> ATO"):
        w = trim(ipw_ate(e, t), TrimSpec.window(0.1, 0.9), t, e)
    assert w.target is Estimand.ATO
    assert w.weights[0] == 0 and w.weights[3] == 0
    assert any("relabeled" in n for n in w.notes)


def test_percentile_cap_and_empty_group():
    e = np.array([0.02, 0.3, 0.5, 0.5, 0.4, 0.6])
    t = np.array([1, 1, 1, 0, 0, 0])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EstimandRelabelWarning)
        w = trim(ipw_ate(e, t), TrimSpec.cap(0.5), t, e)
        assert w.weights.max() <= np.quantile(ipw_ate(e, t).weights, 0.5) + 1e-12
        with pytest.raises(ValidationError, match="untreated"):
            trim(ipw_ate(e, t), TrimSpec.window(0.01, 0.35), t, e)


def test_trim_spec_validation():
    with pytest.raises(ValidationError):
        TrimSpec.window(0.6, 0.4)
    with pytest.raises(ValidationError):
        TrimSpec.cap(0.0)
