"""Balance and overlap diagnostics. None of these touch the outcome."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import Dataset, Estimand, WeightVector
from .errors import ValidationError
from .weighting import ess

FEASIBILITY_TOLERANCE = 0.05
BALANCE_THRESHOLD = 0.1
QUANTILE_LEVELS = (0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0)


def _weights(dataset: Dataset, weights) -> np.ndarray:
    if weights is None:
        return np.ones(dataset.n)
    w = weights.weights if isinstance(weights, WeightVector) else np.asarray(weights, dtype=float)
    if w.shape != (dataset.n,):
        raise ValidationError(f"{w.size} weights for {dataset.n} units")
    return w


def _index(dataset: Dataset, covariate) -> int:
    if isinstance(covariate, str):
        try:
            return dataset.covariate_names.index(covariate)
        except ValueError:
            raise ValidationError(f"no covariate named {covariate!r}") from None
    return int(covariate)


def weighted_mean(x, w) -> float:
    return float(np.sum(w * x) / np.sum(w))


def weighted_variance(x, w) -> float:
    """Reliability-weighted variance; equals the ddof=1 sample variance for unit weights."""
    sw = np.sum(w)
    m = np.sum(w * x) / sw
    denom = sw - np.sum(w * w) / sw
    return float(np.sum(w * (x - m) ** 2) / denom) if denom > 0 else 0.0


def smd(dataset: Dataset, covariate, weights=None) -> float:
    """Standardized mean difference, treated minus untreated.

    The denominator sqrt((s_T^2 + s_C^2) / 2) always comes from the
    unweighted sample, so adjusted and unadjusted SMDs share one scale.
    """
    j = _index(dataset, covariate)
    x = dataset.covariates[:, j]
    w = _weights(dataset, weights)
    tr, un = dataset.treated, dataset.untreated
    if not (np.sum(w[tr]) > 0 and np.sum(w[un]) > 0):
        raise ValidationError("both groups need positive total weight for an SMD")
    diff = weighted_mean(x[tr], w[tr]) - weighted_mean(x[un], w[un])
    s_pool = np.sqrt((np.var(x[tr], ddof=1) + np.var(x[un], ddof=1)) / 2) if min(tr.sum(), un.sum()) > 1 else 0.0
    if s_pool == 0:
        if diff == 0:
            return 0.0
        raise ValidationError(
            f"constant covariate imbalance: {dataset.covariate_names[j]} has zero pooled SD but unequal means"
        )
    return float(diff / s_pool)


def variance_ratio(dataset: Dataset, covariate, weights=None) -> float:
    """Treated over untreated (weighted) variance; NaN when the untreated variance is zero."""
    j = _index(dataset, covariate)
    x = dataset.covariates[:, j]
    w = _weights(dataset, weights)
    tr, un = dataset.treated, dataset.untreated
    vt = weighted_variance(x[tr], w[tr])
    vc = weighted_variance(x[un], w[un])
    if vc == 0:
        return 1.0 if vt == 0 else float("nan")
    return vt / vc


@dataclass
class CovariateBalance:
    covariate: str
    smd_unadjusted: float
    variance_ratio_unadjusted: float
    smd_adjusted: Optional[float] = None
    variance_ratio_adjusted: Optional[float] = None


@dataclass
class BalanceTable:
    rows: list
    n_treated: int
    n_untreated: int
    ess_treated: Optional[float] = None
    ess_untreated: Optional[float] = None
    positivity_flags: list = field(default_factory=list)
    threshold: float = BALANCE_THRESHOLD

    @property
    def balanced(self) -> bool:
        """Every adjusted (or, without weights, unadjusted) |SMD| within the threshold."""
        vals = [r.smd_adjusted if r.smd_adjusted is not None else r.smd_unadjusted for r in self.rows]
        return all(abs(v) <= self.threshold for v in vals)

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "balanced": self.balanced,
            "n": {"treated": self.n_treated, "untreated": self.n_untreated},
            "ess": None if self.ess_treated is None else
            {"treated": self.ess_treated, "untreated": self.ess_untreated},
            "positivity_flags": list(self.positivity_flags),
            "covariates": [
                {
                    "name": r.covariate,
                    "smd_unadjusted": r.smd_unadjusted,
                    "smd_adjusted": r.smd_adjusted,
                    "variance_ratio_unadjusted": r.variance_ratio_unadjusted,
                    "variance_ratio_adjusted": r.variance_ratio_adjusted,
                }
                for r in self.rows
            ],
        }


def balance_table(dataset: Dataset, weights=None, scores=None, window=(0.1, 0.9),
                  threshold: float = BALANCE_THRESHOLD) -> BalanceTable:
    rows = []
    for name in dataset.covariate_names:
        row = CovariateBalance(name, smd(dataset, name), variance_ratio(dataset, name))
        if weights is not None:
            row.smd_adjusted = smd(dataset, name, weights)
            row.variance_ratio_adjusted = variance_ratio(dataset, name, weights)
        rows.append(row)
    table = BalanceTable(rows, int(dataset.treated.sum()), int(dataset.untreated.sum()), threshold=threshold)
    if weights is not None:
        w = _weights(dataset, weights)
        table.ess_treated = ess(w, dataset.treatment, "treated")
        table.ess_untreated = ess(w, dataset.treatment, "untreated")
    if scores is not None:
        e = np.asarray(scores, dtype=float)
        table.positivity_flags = np.flatnonzero((e < window[0]) | (e > window[1])).tolist()
    return table


def target_population(dataset: Dataset, weights=None) -> dict:
    """Weighted covariate means per group: who the estimate is about."""
    w = _weights(dataset, weights)
    out = {}
    for label, mask in (("treated", dataset.treated), ("untreated", dataset.untreated)):
        out[label] = {
            name: weighted_mean(dataset.covariates[mask, j], w[mask])
            for j, name in enumerate(dataset.covariate_names)
        }
    return out


@dataclass
class OverlapReport:
    quantiles: dict
    outside_window: dict
    feasible: dict
    window: tuple
    tolerance: float = FEASIBILITY_TOLERANCE

    def to_dict(self) -> dict:
        return {
            "quantile_levels": list(QUANTILE_LEVELS),
            "quantiles": self.quantiles,
            "window": list(self.window),
            "outside_window": self.outside_window,
            "feasible": {str(k): v for k, v in self.feasible.items()},
            "heuristic": f"score-scale tolerance {self.tolerance:g}; verdicts are a reporting heuristic",
        }


def _covered(src: np.ndarray, ref: np.ndarray, tol: float) -> bool:
    """Every value in ``src`` lies within ``tol`` of some value in ``ref``."""
    if src.size == 0:
        return True
    if ref.size == 0:
        return False
    ref = np.sort(ref)
    pos = np.searchsorted(ref, src)
    left = ref[np.clip(pos - 1, 0, ref.size - 1)]
    right = ref[np.clip(pos, 0, ref.size - 1)]
    gap = np.minimum(np.abs(src - left), np.abs(src - right))
    return bool(np.all(gap <= tol + 1e-12))


def overlap_report(scores, treatments, window=(0.1, 0.9),
                   tolerance: float = FEASIBILITY_TOLERANCE) -> OverlapReport:
    """Score distribution summary and per-estimand feasibility verdicts.

    ATT is feasible when every treated score has an untreated score within
    ``tolerance``; the ATU is the mirror. The ATE needs both, which also
    forces each group's range to span the pooled range within ``tolerance``.
    The ATO only needs some treated and untreated scores to be that close.
    """
    e = np.asarray(scores, dtype=float)
    t = np.asarray(treatments)
    et, ec = e[t == 1], e[t == 0]
    quantiles = {
        label: ([float(q) for q in np.quantile(g, QUANTILE_LEVELS)] if g.size else None)
        for label, g in (("treated", et), ("untreated", ec))
    }
    lo, hi = window
    outside = {
        "treated": int(np.sum((et < lo) | (et > hi))),
        "untreated": int(np.sum((ec < lo) | (ec > hi))),
    }
    att = et.size > 0 and _covered(et, ec, tolerance)
    atu = ec.size > 0 and _covered(ec, et, tolerance)
    ato = False
    if et.size and ec.size:
        srt = np.sort(ec)
        pos = np.searchsorted(srt, et)
        near = np.minimum(np.abs(et - srt[np.clip(pos - 1, 0, srt.size - 1)]),
                          np.abs(et - srt[np.clip(pos, 0, srt.size - 1)]))
        ato = bool(np.any(near <= tolerance + 1e-12))
    feasible = {
        Estimand.ATT: bool(att),
        Estimand.ATU: bool(atu),
        Estimand.ATE: bool(att and atu),
        Estimand.ATO: bool(ato),
    }
    return OverlapReport(quantiles, outside, feasible, tuple(window), tolerance)
