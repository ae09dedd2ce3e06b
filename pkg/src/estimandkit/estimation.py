"""Estimand-labeled effect estimates: weighted contrasts, stratified estimates,
g-computation, ratio measures, subgroup estimates and the bootstrap."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional, Union

import numpy as np

from . import matching as mt
from . import weighting as wt
from .core import Dataset, Estimand, MatchStructure, WeightVector
from .errors import (EstimandKitError, EstimandRelabelWarning, IncompatibleEstimandError,
                     RankDeficiencyError, SolverError, ValidationError)
from .propensity import PropensityModel, collinear_columns, design_matrix, fit_logistic

MEASURES = ("mean-difference", "risk-ratio", "odds-ratio")


@dataclass(frozen=True)
class EffectEstimate:
    estimand: Estimand
    measure: str
    point: float
    method: str
    se: Optional[float] = None
    interval: Optional[tuple] = None
    ess: Optional[dict] = None
    notes: tuple = ()

    def __post_init__(self):
        if not np.isfinite(self.point):
            raise SolverError(f"{self.method} produced a non-finite {self.measure} estimate")

    def to_dict(self) -> dict:
        return {
            "estimand": str(self.estimand),
            "measure": self.measure,
            "point": float(self.point),
            "method": self.method,
            "se": self.se,
            "interval": None if self.interval is None else [float(v) for v in self.interval],
            "ess": self.ess,
            "notes": list(self.notes),
        }


def _group_ess(w, t) -> dict:
    return {"treated": wt.ess(w, t, "treated"), "untreated": wt.ess(w, t, "untreated")}


def _weighted_means(y, w, t):
    # centring on a common reference value keeps constant outcomes exact
    ref = y[0]
    tr, un = t == 1, t == 0
    m1 = ref + np.sum(w[tr] * (y[tr] - ref)) / np.sum(w[tr])
    m0 = ref + np.sum(w[un] * (y[un] - ref)) / np.sum(w[un])
    return float(m1), float(m0)


def hajek_contrast(dataset: Dataset, weights: WeightVector, measure: str = "mean-difference") -> EffectEstimate:
    """Normalized weighted contrast between treated and untreated outcome means."""
    if measure != "mean-difference":
        return ratio_measures(dataset, weights, measure)
    y = dataset.require_outcome()
    weights.check_usable(dataset.treatment)
    w = weights.weights
    m1, m0 = _weighted_means(y, w, dataset.treatment)
    return EffectEstimate(weights.target, measure, m1 - m0, weights.provenance,
                          ess=_group_ess(w, dataset.treatment), notes=weights.notes)


def ratio_measures(dataset: Dataset, weights: WeightVector, measure: str = "risk-ratio") -> EffectEstimate:
    """Risk ratio or odds ratio from weighted outcome proportions (0/1 outcomes only)."""
    if measure not in ("risk-ratio", "odds-ratio"):
        raise ValidationError(f"unknown ratio measure {measure!r}")
    y = dataset.require_outcome()
    if not np.all((y == 0) | (y == 1)):
        raise ValidationError(f"{measure} needs a 0/1 outcome")
    weights.check_usable(dataset.treatment)
    p1, p0 = _weighted_means(y, weights.weights, dataset.treatment)
    if measure == "risk-ratio":
        if p0 == 0:
            raise ValidationError("risk ratio undefined: untreated weighted proportion is 0")
        point = p1 / p0
    else:
        if not (0 < p1 < 1 and 0 < p0 < 1):
            raise ValidationError("odds ratio undefined: a weighted proportion is exactly 0 or 1")
        point = (p1 / (1 - p1)) / (p0 / (1 - p0))
    return EffectEstimate(weights.target, measure, point, weights.provenance,
                          ess=_group_ess(weights.weights, dataset.treatment), notes=weights.notes)


def stratified_estimate(dataset: Dataset, ms: MatchStructure, target: Union[Estimand, str]) -> EffectEstimate:
    """Combine within-stratum mean differences.

    Stratum weights are proportional to stratum size (ATE), treated count
    (ATT) or untreated count (ATU); discarding target units relabels to ATO.
    """
    target = Estimand.parse(target)
    y = dataset.require_outcome()
    t = dataset.treatment
    findings = ms.check(t)
    if findings:
        raise ValidationError(f"invalid match structure: {'; '.join(findings)}")
    effective, style, notes = mt.resolve_target(ms, target, t)
    if notes:
        warnings.warn(notes[0], EstimandRelabelWarning, stacklevel=2)
    diffs, sizes = [], []
    for s in ms.strata:
        s = np.array(s, dtype=int)
        is_t = t[s] == 1
        if not is_t.any() or is_t.all():
            raise ValidationError(f"stratum {s.tolist()} lacks a treatment group")
        diffs.append(y[s][is_t].mean() - y[s][~is_t].mean())
        sizes.append({Estimand.ATT: is_t.sum(), Estimand.ATU: (~is_t).sum()}.get(style, s.size))
    sizes = np.array(sizes, dtype=float)
    point = float(np.dot(sizes, diffs) / sizes.sum())
    return EffectEstimate(effective, "mean-difference", point, f"stratified({ms.method})->{target}", notes=notes)


def _ols_fit(x: np.ndarray, y: np.ndarray, names, group: str) -> np.ndarray:
    design = design_matrix(x)
    bad = collinear_columns(design, ("(intercept)",) + tuple(names))
    if bad:
        raise RankDeficiencyError(
            f"outcome model for the {group} group is rank deficient; collinear columns: {', '.join(bad)}"
        )
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    return coef


def g_computation(dataset: Dataset, target: Union[Estimand, str], weights=None,
                  scores=None) -> EffectEstimate:
    """Average predicted potential outcome contrasts over the target population.

    One linear model per treatment group (equivalently a fully
    treatment-interacted model) predicts both potential outcomes for every
    unit. The average runs over all units (ATE), the treated (ATT), the
    untreated (ATU), or with tilting weights e(1 - e) (ATO; ``scores`` are
    fitted when not given). Explicit ``weights`` override the population
    weights for any target.
    """
    target = Estimand.parse(target)
    y = dataset.require_outcome()
    x = dataset.covariates
    tr, un = dataset.treated, dataset.untreated
    b1 = _ols_fit(x[tr], y[tr], dataset.covariate_names, "treated")
    b0 = _ols_fit(x[un], y[un], dataset.covariate_names, "untreated")
    full = design_matrix(x)
    contrast = full @ b1 - full @ b0
    if weights is not None:
        pop = weights.weights if isinstance(weights, WeightVector) else np.asarray(weights, dtype=float)
    elif target is Estimand.ATE:
        pop = np.ones(dataset.n)
    elif target is Estimand.ATT:
        pop = tr.astype(float)
    elif target is Estimand.ATU:
        pop = un.astype(float)
    else:
        e = fit_logistic(dataset).scores if scores is None else np.asarray(scores, dtype=float)
        pop = e * (1 - e)
    if pop.shape != (dataset.n,) or not np.sum(pop) > 0:
        raise ValidationError("g-computation population weights must be nonnegative with a positive total")
    point = float(np.dot(pop, contrast) / np.sum(pop))
    label = "g-computation" + ("(tilting e(1-e))" if target is Estimand.ATO and weights is None else "")
    return EffectEstimate(target, "mean-difference", point, label)


# --------------------------------------------------------------------------
# pipelines


WEIGHTING_METHODS = ("ipw", "smr-weights", "overlap-weights", "matching-weights", "weight-trimming")
MATCHING_METHODS = ("pair-matching", "optimal-pair-matching", "caliper-matching", "full-matching",
                    "fine-stratification", "cem", "cardinality-matching")
METHODS = WEIGHTING_METHODS + MATCHING_METHODS + ("g-computation",)


@dataclass(frozen=True)
class Design:
    """Outcome-free result of a pipeline's design stage."""

    weights: Optional[WeightVector]
    model: Optional[PropensityModel] = None
    match: Optional[MatchStructure] = None
    notes: tuple = ()


@dataclass(frozen=True)
class Pipeline:
    """A propensity -> design -> estimate recipe, re-runnable on any dataset.

    ``method`` is one of :data:`METHODS`. Parameters not used by the method are
    ignored. ``covariates`` restricts the propensity/matching covariates
    (default: all columns of the dataset).
    """

    method: str
    caliper: Optional[float] = None
    ratio: int = 1
    strata_count: int = 5
    bins: Optional[int] = None
    tolerance: Union[float, Mapping[str, float], None] = None
    distance: str = "logit"
    trim: Optional[wt.TrimSpec] = None
    measure: str = "mean-difference"
    covariates: Optional[tuple] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")

    def _data(self, dataset: Dataset) -> Dataset:
        if self.covariates is None:
            return dataset
        keep = [c for c in self.covariates if c in dataset.covariate_names]
        return dataset.select_covariates(keep)

    def design(self, dataset: Dataset, target: Union[Estimand, str]) -> Design:
        """Everything up to (not including) the outcome."""
        target = Estimand.parse(target)
        data = self._data(dataset).without_outcome()
        t = data.treatment
        method = self.method
        if method == "g-computation":
            return Design(None)
        if method in ("cem", "cardinality-matching"):
            spec = mt.MatchSpec(method=method, bins=self.bins, tolerance=self.tolerance)
            ms = mt.run_matching(data, None, spec)
            return Design(mt.match_to_weights(ms, target, t), None, ms)

        model = fit_logistic(data)
        e = model.scores
        if method in WEIGHTING_METHODS:
            if method == "weight-trimming":
                w = wt.trim(wt.ipw_ate(e, t), self.trim or wt.TrimSpec(), t, e)
            else:
                if method == "ipw" and target is not Estimand.ATE:
                    raise IncompatibleEstimandError(f"inverse probability weights target the ATE, not the {target}")
                if method in ("overlap-weights", "matching-weights") and target is not Estimand.ATO:
                    raise IncompatibleEstimandError(f"{method} target the ATO, not the {target}")
                w = wt.weights_for(method, e, t, target)
                if self.trim is not None:
                    w = wt.trim(w, self.trim, t, e)
            return Design(w, model)

        pair_target = target
        caliper = self.caliper
        if method == "caliper-matching":
            caliper = mt.DEFAULT_CALIPER if caliper is None else caliper
            if target is Estimand.ATO:
                # match on the smaller group
                pair_target = Estimand.ATT if t.sum() <= (t == 0).sum() else Estimand.ATU
        spec = mt.MatchSpec(
            method={"pair-matching": "greedy-pair", "caliper-matching": "greedy-pair",
                    "optimal-pair-matching": "optimal-pair", "full-matching": "full",
                    "fine-stratification": "fine"}[method],
            distance=self.distance, caliper=caliper, ratio=self.ratio,
            strata_count=self.strata_count,
            target=pair_target if pair_target in (Estimand.ATT, Estimand.ATU) else Estimand.ATT,
        )
        if method in ("pair-matching", "optimal-pair-matching", "caliper-matching") and \
                pair_target not in (Estimand.ATT, Estimand.ATU):
            raise IncompatibleEstimandError(
                f"{method} cannot target the {target}: the matched sample resembles one group, not the full sample"
            )
        ms = mt.run_matching(data, e, spec)
        return Design(mt.match_to_weights(ms, target, t), model, ms)

    def __call__(self, dataset: Dataset, target: Union[Estimand, str]) -> EffectEstimate:
        target = Estimand.parse(target)
        if self.method == "g-computation":
            return g_computation(self._data(dataset), target)
        design = self.design(dataset, target)
        return hajek_contrast(dataset, design.weights, self.measure)


PipelineLike = Callable[[Dataset, Estimand], EffectEstimate]


# --------------------------------------------------------------------------
# subgroups and bootstrap


def _subgroup_mask(dataset: Dataset, predicate) -> np.ndarray:
    if callable(predicate):
        names = dataset.covariate_names
        return np.array([bool(predicate(dict(zip(names, row)))) for row in dataset.covariates.tolist()],
                        dtype=bool)
    mask = np.asarray(predicate, dtype=bool)
    if mask.shape != (dataset.n,):
        raise ValidationError("subgroup mask length does not match the dataset")
    return mask


def subgroup_estimate(dataset: Dataset, predicate, pipeline: PipelineLike,
                      target: Union[Estimand, str]) -> EffectEstimate:
    """Re-run the whole pipeline inside a covariate-defined subgroup.

    ``predicate`` maps a ``{covariate name: value}`` dict to bool (or is a
    boolean mask). Covariates constant within the subgroup are dropped before
    refitting since they carry no information there.
    """
    target = Estimand.parse(target)
    mask = _subgroup_mask(dataset, predicate)
    sub = dataset.subset(np.flatnonzero(mask))
    if not (np.any(sub.treated) and np.any(sub.untreated)):
        raise ValidationError("subgroup must contain both treated and untreated units")
    x = sub.covariates
    varying = [n for j, n in enumerate(sub.covariate_names) if np.ptp(x[:, j]) > 0] if sub.n else []
    sub = sub.select_covariates(varying)
    if isinstance(pipeline, Pipeline) and pipeline.covariates is not None:
        pipeline = replace(pipeline, covariates=tuple(c for c in pipeline.covariates if c in varying))
    est = pipeline(sub, target)
    return replace(est, method=f"subgroup[{int(mask.sum())} units]:{est.method}")


@dataclass(frozen=True)
class BootstrapResult:
    se: float
    interval: tuple
    replicates: np.ndarray
    failures: int
    messages: tuple = field(default=(), repr=False)


def replicate_rngs(seed: int, count: int) -> list:
    """One independent generator per replicate index, derived from ``seed``."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


def bootstrap(dataset: Dataset, pipeline: PipelineLike, B: int, seed: int,
              target: Union[Estimand, str]) -> BootstrapResult:
    """Unit-level nonparametric bootstrap re-running the full pipeline per resample.

    Replicate ``b`` draws from its own stream (``SeedSequence(seed).spawn``),
    so results do not depend on execution order. More than 10% failed
    replicates aborts with a :class:`SolverError`.
    """
    if B < 2:
        raise ValidationError(f"bootstrap needs B >= 2, got {B}")
    target = Estimand.parse(target)
    estimates, messages = [], []
    for b, rng in enumerate(replicate_rngs(seed, B)):
        idx = rng.integers(0, dataset.n, size=dataset.n)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", EstimandRelabelWarning)
                estimates.append(pipeline(dataset.subset(idx), target).point)
        except (EstimandKitError, np.linalg.LinAlgError) as exc:
            messages.append(f"replicate {b}: {exc}")
    failures = len(messages)
    if failures > 0.1 * B:
        raise SolverError(
            f"bootstrap aborted: {failures} of {B} replicates failed; first failures: " + " | ".join(messages[:3])
        )
    reps = np.array(estimates)
    se = float(np.std(reps, ddof=1)) if reps.size > 1 else 0.0
    lo, hi = np.percentile(reps, [2.5, 97.5])
    return BootstrapResult(se, (float(lo), float(hi)), reps, failures, tuple(messages))


def with_bootstrap(estimate: EffectEstimate, result: BootstrapResult) -> EffectEstimate:
    notes = estimate.notes
    if result.failures:
        notes = notes + (f"bootstrap: {result.failures} replicate(s) failed and were skipped",)
    return replace(estimate, se=result.se, interval=result.interval, notes=notes)

