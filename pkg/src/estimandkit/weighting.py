"""Estimand-targeted propensity score weights, trimming and effective sample size."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .core import Estimand, WeightVector
from .errors import EstimandRelabelWarning, IncompatibleEstimandError, ValidationError

DEFAULT_WINDOW = (0.1, 0.9)
DEFAULT_PERCENTILE = 0.99


def _inputs(scores, treatments):
    e = np.asarray(scores, dtype=float)
    t = np.asarray(treatments)
    if e.shape != t.shape or e.ndim != 1:
        raise ValidationError("scores and treatments must be 1-d and of equal length")
    if not np.all((e > 0) & (e < 1)):
        bad = np.flatnonzero(~((e > 0) & (e < 1)))
        raise ValidationError(f"propensity scores must lie strictly inside (0, 1); offending units {bad[:10].tolist()}")
    return e, t == 1


def ipw_ate(scores, treatments) -> WeightVector:
    """Inverse probability weights: 1/e for treated, 1/(1-e) for untreated."""
    e, treated = _inputs(scores, treatments)
    w = np.where(treated, 1 / e, 1 / (1 - e))
    return WeightVector(w, Estimand.ATE, "inverse-probability-weights")


def smr(scores, treatments, target: Union[Estimand, str] = Estimand.ATT) -> WeightVector:
    """Standardized mortality ratio weights.

    For the ATT treated units keep weight exactly 1 and untreated units get the
    odds e/(1-e); the ATU mirror gives treated units (1-e)/e and untreated 1.
    """
    target = Estimand.parse(target)
    e, treated = _inputs(scores, treatments)
    if target is Estimand.ATT:
        w = np.where(treated, 1.0, e / (1 - e))
    elif target is Estimand.ATU:
        w = np.where(treated, (1 - e) / e, 1.0)
    else:
        raise IncompatibleEstimandError(f"SMR weights target the ATT or ATU, not the {target}")
    return WeightVector(w, target, f"smr-weights({target})")


def overlap_ato(scores, treatments) -> WeightVector:
    e, treated = _inputs(scores, treatments)
    return WeightVector(np.where(treated, 1 - e, e), Estimand.ATO, "overlap-weights")


def matching_weights(scores, treatments) -> WeightVector:
    e, treated = _inputs(scores, treatments)
    m = np.minimum(e, 1 - e)
    return WeightVector(np.where(treated, m / e, m / (1 - e)), Estimand.ATO, "matching-weights")


@dataclass(frozen=True)
class TrimSpec:
    """Either a propensity score window ``[lo, hi]`` or a percentile cap on weights."""

    mode: str = "score-window"
    lo: float = DEFAULT_WINDOW[0]
    hi: float = DEFAULT_WINDOW[1]
    percentile: float = DEFAULT_PERCENTILE

    def __post_init__(self):
        if self.mode == "score-window":
            if not (0 < self.lo < self.hi < 1):
                raise ValidationError(f"trim window needs 0 < lo < hi < 1, got [{self.lo}, {self.hi}]")
        elif self.mode == "weight-percentile":
            if not (0 < self.percentile <= 1):
                raise ValidationError(f"trim percentile must lie in (0, 1], got {self.percentile}")
        else:
            raise ValidationError(f"unknown trim mode {self.mode!r}; use 'score-window' or 'weight-percentile'")

    @classmethod
    def window(cls, lo: float = DEFAULT_WINDOW[0], hi: float = DEFAULT_WINDOW[1]) -> "TrimSpec":
        return cls("score-window", lo=lo, hi=hi)

    @classmethod
    def cap(cls, percentile: float = DEFAULT_PERCENTILE) -> "TrimSpec":
        return cls("weight-percentile", percentile=percentile)

    def describe(self) -> str:
        if self.mode == "score-window":
            return f"score-window[{self.lo:g},{self.hi:g}]"
        return f"weight-percentile[{self.percentile:g}]"


def trim(weights: WeightVector, spec: TrimSpec, treatments, scores=None) -> WeightVector:
    """Trim ``weights`` and relabel the result as targeting the ATO.

    Score-window mode zeroes units whose score falls outside the window (needs
    ``scores``); weight-percentile mode caps weights at the given percentile of
    the positive weights. The result always targets the ATO, since any
    restriction changes the population the weights describe.
    """
    w = weights.weights.copy()
    t = np.asarray(treatments)
    if spec.mode == "score-window":
        if scores is None:
            raise ValidationError("score-window trimming needs propensity scores")
        e = np.asarray(scores, dtype=float)
        outside = (e < spec.lo) | (e > spec.hi)
        w[outside] = 0.0
        changed = int(np.count_nonzero(outside & (weights.weights > 0)))
    else:
        positive = w[w > 0]
        if positive.size == 0:
            raise ValidationError("no positive weights to cap")
        cap = np.quantile(positive, spec.percentile)
        changed = int(np.count_nonzero(w > cap))
        w = np.minimum(w, cap)
    for label, mask in (("treated", t == 1), ("untreated", t == 0)):
        if not np.any(w[mask] > 0):
            raise ValidationError(f"trimming {spec.describe()} removed every {label} unit")
    note = (f"trimming {spec.describe()} changed {changed} unit weight(s); "
            f"estimand relabeled {weights.target} -> ATO")
    if weights.target is not Estimand.ATO:
        warnings.warn(note, EstimandRelabelWarning, stacklevel=2)
    return WeightVector(w, Estimand.ATO, f"{weights.provenance}+trim:{spec.describe()}",
                        weights.notes + (note,))


def ess(weights, treatments=None, group: str = "all") -> float:
    """Effective sample size (sum w)^2 / sum w^2 over ``group``."""
    w = weights.weights if isinstance(weights, WeightVector) else np.asarray(weights, dtype=float)
    if group != "all":
        if treatments is None:
            raise ValidationError("group ESS needs treatments")
        t = np.asarray(treatments)
        if group == "treated":
            w = w[t == 1]
        elif group == "untreated":
            w = w[t == 0]
        else:
            raise ValidationError(f"unknown group {group!r}")
    top = float(np.max(w)) if w.size else 0.0
    if top == 0:
        raise ValidationError(f"all weights in group {group!r} are zero")
    w = w / top
    return float(np.sum(w)) ** 2 / float(np.sum(w * w))


def weights_for(method: str, scores, treatments, target: Optional[Estimand] = None) -> WeightVector:
    """Dispatch a weighting method id to its weight function."""
    if method in ("ipw", "inverse-probability-weights"):
        return ipw_ate(scores, treatments)
    if method == "smr-weights":
        return smr(scores, treatments, target or Estimand.ATT)
    if method == "overlap-weights":
        return overlap_ato(scores, treatments)
    if method == "matching-weights":
        return matching_weights(scores, treatments)
    raise ValidationError(f"unknown weighting method {method!r}")
