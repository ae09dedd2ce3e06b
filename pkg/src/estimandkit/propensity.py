"""Propensity scores P(T=1 | X=x) from a maximum-likelihood logistic regression fitted by IRLS."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit, log_expit

from .core import Dataset
from .errors import PerfectSeparationError, RankDeficiencyError, ValidationError

SCORE_FLOOR = 1e-12
TOLERANCE = 1e-10
MAX_ITER = 100
RIDGE = 1e-10
SEPARATION_BOUND = 30.0


@dataclass(frozen=True, eq=False)
class PropensityModel:
    """Fitted logistic propensity model.

    ``coefficients[0]`` is the intercept; the rest follow ``covariate_names``.
    """

    coefficients: np.ndarray
    covariate_names: tuple
    scores: np.ndarray
    converged: bool
    iterations: int

    def predict(self, covariates) -> np.ndarray:
        x = np.asarray(covariates, dtype=float).reshape(-1, len(self.covariate_names))
        eta = self.coefficients[0] + x @ self.coefficients[1:]
        return np.clip(expit(eta), SCORE_FLOOR, 1 - SCORE_FLOOR)

    @property
    def logits(self) -> np.ndarray:
        return logit(self.scores)


def design_matrix(covariates) -> np.ndarray:
    x = np.asarray(covariates, dtype=float)
    return np.column_stack([np.ones(x.shape[0]), x])


def log_likelihood(coef, design, treatment) -> float:
    """Bernoulli log-likelihood of ``treatment`` under linear predictor ``design @ coef``."""
    eta = design @ coef
    t = np.asarray(treatment, dtype=float)
    return float(np.sum(t * log_expit(eta) + (1 - t) * log_expit(-eta)))


def log_likelihood_gradient(coef, design, treatment) -> np.ndarray:
    return design.T @ (np.asarray(treatment, dtype=float) - expit(design @ coef))


def collinear_columns(design: np.ndarray, names: Sequence[str]) -> list[str]:
    """Columns that are linear combinations of the columns before them."""
    kept: list[int] = []
    bad = []
    tol_rank = np.linalg.matrix_rank
    for j in range(design.shape[1]):
        trial = kept + [j]
        if tol_rank(design[:, trial]) == len(trial):
            kept.append(j)
        else:
            bad.append(names[j])
    return bad


def fit_logistic(dataset: Dataset, covariates: Optional[Sequence[str]] = None) -> PropensityModel:
    """Fit the propensity model on ``covariates`` (default: all dataset covariates).

    The fit runs on internally standardized covariates, which leaves the MLE
    unchanged but makes the separation bound scale-free. Complete separation
    raises; quasi-complete separation stops the iteration and returns an
    unconverged model with clamped scores.
    """
    dataset.require_valid()
    if covariates is not None:
        dataset = dataset.select_covariates(covariates)
    names = dataset.covariate_names
    x = dataset.covariates
    t = dataset.treatment.astype(float)

    design = design_matrix(x)
    bad = collinear_columns(design, ("(intercept)",) + names)
    if bad:
        raise RankDeficiencyError(
            f"propensity design matrix is rank deficient; collinear columns: {', '.join(bad)}"
        )

    centre = x.mean(axis=0)
    scale = x.std(axis=0)
    zdesign = design_matrix((x - centre) / scale) if x.shape[1] else design

    p = zdesign.shape[1]
    beta = np.zeros(p)
    frac = t.mean()
    beta[0] = np.log(frac / (1 - frac))
    converged = False
    iterations = 0
    for iterations in range(1, MAX_ITER + 1):
        mu = expit(zdesign @ beta)
        w = mu * (1 - mu)
        hessian = zdesign.T @ (zdesign * w[:, None]) + RIDGE * np.eye(p)
        step = np.linalg.solve(hessian, zdesign.T @ (t - mu))
        beta = beta + step
        if np.max(np.abs(beta)) > SEPARATION_BOUND:
            break
        if np.max(np.abs(step)) < TOLERANCE:
            converged = True
            break
    # coefficients diverge slowly under separation, so check whenever the fit stalls
    if not converged and np.all(((zdesign @ beta) > 0) == (t == 1)):
        raise PerfectSeparationError(
            "treatment is perfectly separated by the covariates "
            f"({', '.join(names)}); propensity scores are 0/1, "
            "use exact stratification on these covariates instead"
        )

    slopes = beta[1:] / scale if x.shape[1] else beta[1:]
    intercept = beta[0] - float(np.dot(slopes, centre)) if x.shape[1] else beta[0]
    coefficients = np.concatenate([[intercept], slopes])
    scores = np.clip(expit(zdesign @ beta), SCORE_FLOOR, 1 - SCORE_FLOOR)
    coefficients.setflags(write=False)
    scores.setflags(write=False)
    return PropensityModel(coefficients, names, scores, converged, iterations)


def logit(scores) -> np.ndarray:
    """Elementwise ln(e / (1 - e)); scores must lie strictly inside (0, 1)."""
    e = np.asarray(scores, dtype=float)
    if np.any((e <= 0) | (e >= 1)) or not np.all(np.isfinite(e)):
        bad = np.flatnonzero(~((e > 0) & (e < 1)))
        raise ValidationError(f"logit needs scores strictly inside (0, 1); offending positions {bad[:10].tolist()}")
    return np.log(e) - np.log1p(-e)
