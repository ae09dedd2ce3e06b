"""Ground-truth harness: data with known potential outcomes and bias evaluation of pipelines."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np
from scipy.special import expit

from .core import Dataset, Estimand, PotentialOutcomeTable, observed_from_potential
from .diagnostics import overlap_report
from .errors import EstimandKitError, SolverError, ValidationError

ATO_DEFINITION = "ATO uses tilting h(x) = e(x)(1 - e(x)) on the true propensity scores"

# X, T, Y1, Y0 for the ten-patient example population
TABLE1 = (
    (0, 1, 80, 60),
    (0, 1, 80, 70),
    (0, 1, 60, 10),
    (1, 1, 30, 30),
    (0, 0, 50, 40),
    (0, 0, 30, 40),
    (1, 0, 70, 70),
    (1, 0, 60, 50),
    (1, 0, 50, 80),
    (1, 0, 50, 60),
)
# population treated share within X = 0 and X = 1
TABLE1_SCORES = {0: 0.6, 1: 0.2}


def table1() -> tuple[Dataset, PotentialOutcomeTable, np.ndarray]:
    """The example population as observed data, potential outcomes and true scores."""
    rows = np.array(TABLE1, dtype=float)
    pot = PotentialOutcomeTable(rows[:, 2], rows[:, 3])
    y = observed_from_potential(pot, rows[:, 1])
    data = Dataset(rows[:, :1], rows[:, 1], ("X",), y)
    scores = np.array([TABLE1_SCORES[int(x)] for x in rows[:, 0]])
    return data, pot, scores


def true_estimands(pot: PotentialOutcomeTable, treatments, scores=None) -> dict:
    """Sample estimands from complete potential outcomes.

    ATE, ATT and ATU average the individual effects over everyone, the
    treated and the untreated. The ATO (only with ``scores``) weights each
    unit by e(1 - e).
    """
    t = np.asarray(treatments)
    if t.shape != (len(pot),):
        raise ValidationError(f"{t.size} treatments for {len(pot)} units")
    ice = pot.ice
    if not np.any(t == 1) or not np.any(t == 0):
        raise ValidationError("true estimands need both treated and untreated units")
    out = {
        Estimand.ATE: float(np.mean(ice)),
        Estimand.ATT: float(np.mean(ice[t == 1])),
        Estimand.ATU: float(np.mean(ice[t == 0])),
    }
    if scores is not None:
        e = np.asarray(scores, dtype=float)
        h = e * (1 - e)
        if not np.sum(h) > 0:
            raise ValidationError("every true score is 0 or 1: the overlap population is empty")
        out[Estimand.ATO] = float(np.sum(h * ice) / np.sum(h))
    return out


# --------------------------------------------------------------------------
# data-generating processes


@dataclass(frozen=True)
class CovariateLaw:
    """``binary`` (a = P(X=1)), ``uniform`` (on [a, b]) or ``normal`` (mean a, sd b)."""

    kind: str
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if self.kind == "binary" and not (0 <= self.a <= 1):
            raise ValidationError(f"binary covariate probability must lie in [0, 1], got {self.a}")
        if self.kind == "uniform" and not (self.a < self.b):
            raise ValidationError(f"uniform covariate needs a < b, got [{self.a}, {self.b}]")
        if self.kind == "normal" and not (self.b >= 0):
            raise ValidationError(f"normal covariate sd must be >= 0, got {self.b}")
        if self.kind not in ("binary", "uniform", "normal"):
            raise ValidationError(f"unknown covariate law {self.kind!r}")

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "binary":
            return (rng.random(n) < self.a).astype(float)
        if self.kind == "uniform":
            return rng.uniform(self.a, self.b, n)
        return rng.normal(self.a, self.b, n)


@dataclass(frozen=True)
class HardRegion:
    """Force the true score to ``score`` (0 or 1) where covariate ``covariate`` lies in [lo, hi)."""

    covariate: int
    lo: float
    hi: float
    score: float

    def __post_init__(self):
        if self.score not in (0, 1):
            raise ValidationError(f"hard region score must be 0 or 1, got {self.score}")
        if not self.lo < self.hi:
            raise ValidationError(f"hard region needs lo < hi, got [{self.lo}, {self.hi})")


@dataclass(frozen=True)
class Frailty:
    """Unmeasured 0/1 frailty, present only for units whose score lies outside [lo, hi].

    A frail unit has its treatment logit pushed further into its tail by
    ``treatment_shift`` and its Y^0 moved by ``outcome_shift`` in the same
    direction (up in the upper tail, down in the lower tail).
    """

    lo: float = 0.2
    hi: float = 0.8
    prevalence: float = 0.5
    treatment_shift: float = 3.0
    outcome_shift: float = 2.0

    def __post_init__(self):
        if not (0 <= self.lo < self.hi <= 1):
            raise ValidationError(f"frailty window needs 0 <= lo < hi <= 1, got [{self.lo}, {self.hi}]")
        if not (0 <= self.prevalence <= 1):
            raise ValidationError(f"frailty prevalence must lie in [0, 1], got {self.prevalence}")


@dataclass(frozen=True)
class DGPConfig:
    """Covariate laws, a logistic treatment model and a linear outcome model.

    Y^0 = baseline(x) + noise, Y^1 = baseline(x) + effect(x) + noise, with
    independent normal noise of sd ``noise_sd`` on each potential outcome.
    """

    n: int
    covariates: tuple
    treatment_intercept: float = 0.0
    treatment_coefs: tuple = ()
    hard_regions: tuple = ()
    baseline_intercept: float = 0.0
    baseline_coefs: tuple = ()
    effect_intercept: float = 0.0
    effect_coefs: tuple = ()
    noise_sd: float = 1.0
    frailty: Optional[Frailty] = None
    seed: int = 0
    names: Optional[tuple] = None

    def __post_init__(self):
        p = len(self.covariates)
        if self.n < 2:
            raise ValidationError(f"n must be at least 2, got {self.n}")
        for label in ("treatment_coefs", "baseline_coefs", "effect_coefs"):
            v = tuple(getattr(self, label)) or (0.0,) * p
            if len(v) != p:
                raise ValidationError(f"{label} has {len(v)} entries for {p} covariates")
            object.__setattr__(self, label, v)
        if self.noise_sd < 0:
            raise ValidationError(f"noise_sd must be >= 0, got {self.noise_sd}")
        regions = sorted(self.hard_regions, key=lambda r: (r.covariate, r.lo))
        for r in regions:
            if not 0 <= r.covariate < p:
                raise ValidationError(f"hard region refers to covariate {r.covariate} of {p}")
        for r1, r2 in zip(regions, regions[1:]):
            if r1.covariate == r2.covariate and r2.lo < r1.hi:
                raise ValidationError("hard regions on the same covariate must be disjoint")
        if self.names is not None and len(self.names) != p:
            raise ValidationError("names must match the number of covariates")

    @property
    def covariate_names(self) -> tuple:
        return self.names or tuple(f"x{j + 1}" for j in range(len(self.covariates)))

    @classmethod
    def from_dict(cls, d: dict) -> "DGPConfig":
        d = dict(d)
        try:
            d["covariates"] = tuple(CovariateLaw(**c) for c in d["covariates"])
            d["hard_regions"] = tuple(HardRegion(**r) for r in d.get("hard_regions", ()))
            if d.get("frailty") is not None:
                d["frailty"] = Frailty(**d["frailty"])
            for key in ("treatment_coefs", "baseline_coefs", "effect_coefs", "names"):
                if d.get(key) is not None:
                    d[key] = tuple(d[key])
            return cls(**d)
        except (TypeError, KeyError) as exc:
            raise ValidationError(f"invalid DGP config: {exc}") from None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def generate(config: DGPConfig) -> tuple[Dataset, PotentialOutcomeTable, np.ndarray]:
    """Draw one dataset; returns observed data, potential outcomes and true scores.

    The random streams are drawn in a fixed order regardless of options, so
    the same config always produces bit-identical output.
    """
    rng = np.random.default_rng(config.seed)
    n = config.n
    x = np.column_stack([law.draw(rng, n) for law in config.covariates])
    u_frail = rng.random(n)
    u_treat = rng.random(n)
    noise0 = rng.standard_normal(n) * config.noise_sd
    noise1 = rng.standard_normal(n) * config.noise_sd

    eta = config.treatment_intercept + x @ np.asarray(config.treatment_coefs)
    frail_shift = np.zeros(n)
    if config.frailty is not None:
        fr = config.frailty
        pre = expit(eta)
        side = np.where(pre > fr.hi, 1.0, np.where(pre < fr.lo, -1.0, 0.0))
        frail = (side != 0) & (u_frail < fr.prevalence)
        frail_shift = side * frail
        eta = eta + fr.treatment_shift * frail_shift
    scores = expit(eta)
    for r in config.hard_regions:
        col = x[:, r.covariate]
        scores = np.where((col >= r.lo) & (col < r.hi), float(r.score), scores)

    t = (u_treat < scores).astype(float)
    base = config.baseline_intercept + x @ np.asarray(config.baseline_coefs)
    effect = config.effect_intercept + x @ np.asarray(config.effect_coefs)
    y0 = base + noise0
    if config.frailty is not None:
        y0 = y0 + config.frailty.outcome_shift * frail_shift
    y1 = base + effect + noise1
    pot = PotentialOutcomeTable(y1, y0)
    data = Dataset(x, t, config.covariate_names, observed_from_potential(pot, t))
    scores.setflags(write=False)
    return data, pot, scores


# Ready-made configurations ------------------------------------------------


def scenario_a(n: int = 1000, seed: int = 0) -> DGPConfig:
    """Untreated across the whole range of X, treated only where X >= 0.5."""
    return DGPConfig(
        n=n, covariates=(CovariateLaw("uniform", 0.0, 1.0),),
        treatment_intercept=-2.0, treatment_coefs=(3.0,),
        hard_regions=(HardRegion(0, -np.inf, 0.5, 0),),
        baseline_intercept=10.0, baseline_coefs=(5.0,), effect_intercept=1.0, effect_coefs=(2.0,),
        noise_sd=1.0, seed=seed, names=("X",),
    )


def scenario_b(n: int = 1000, seed: int = 0) -> DGPConfig:
    """Untreated only for low X, treated only for high X, both in a middle band."""
    return DGPConfig(
        n=n, covariates=(CovariateLaw("uniform", 0.0, 1.0),),
        treatment_intercept=-3.0, treatment_coefs=(6.0,),
        hard_regions=(HardRegion(0, -np.inf, 1 / 3, 0), HardRegion(0, 2 / 3, np.inf, 1)),
        baseline_intercept=10.0, baseline_coefs=(5.0,), effect_intercept=1.0, effect_coefs=(2.0,),
        noise_sd=1.0, seed=seed, names=("X",),
    )


def saturated_binary(n: int = 400, seed: int = 0) -> DGPConfig:
    """One binary confounder that modifies the effect; the logistic model is saturated."""
    return DGPConfig(
        n=n, covariates=(CovariateLaw("binary", 0.5),),
        treatment_intercept=0.4, treatment_coefs=(-1.8,),
        baseline_intercept=50.0, baseline_coefs=(10.0,), effect_intercept=15.0, effect_coefs=(-20.0,),
        noise_sd=10.0, seed=seed, names=("X",),
    )


def frailty_scenario(n: int = 500, seed: int = 0, lo: float = 0.2, hi: float = 0.8) -> DGPConfig:
    """Tail confounding: an unmeasured frailty acts only where the score is outside [lo, hi]."""
    return DGPConfig(
        n=n, covariates=(CovariateLaw("normal", 0.0, 1.0),),
        treatment_intercept=0.0, treatment_coefs=(1.5,),
        baseline_intercept=0.0, baseline_coefs=(1.0,), effect_intercept=1.0, effect_coefs=(0.0,),
        noise_sd=1.0, frailty=Frailty(lo=lo, hi=hi, prevalence=0.5, treatment_shift=3.0, outcome_shift=2.0),
        seed=seed, names=("X",),
    )


SCENARIOS = {
    "A": scenario_a,
    "B": scenario_b,
    "saturated": saturated_binary,
    "frailty": frailty_scenario,
}


# --------------------------------------------------------------------------
# bias evaluation


@dataclass
class BiasResult:
    target: Estimand
    mean_bias: float
    rmse: float
    mc_se: float
    estimates: np.ndarray
    truths: np.ndarray
    seeds: list
    infeasible: int = 0
    labels: list = field(default_factory=list)

    @property
    def replications(self) -> int:
        return len(self.estimates)

    def to_dict(self) -> dict:
        return {
            "estimand": str(self.target),
            "ato_definition": ATO_DEFINITION,
            "replications": self.replications,
            "mean_bias": self.mean_bias,
            "rmse": self.rmse,
            "mc_se": self.mc_se,
            "infeasible_verdicts": self.infeasible,
            "replicates": [
                {"index": i, "seed": s, "estimate": float(e), "truth": float(tv),
                 "bias": float(e - tv), "estimand_reported": lab}
                for i, (s, e, tv, lab) in enumerate(zip(self.seeds, self.estimates, self.truths, self.labels))
            ],
        }


def replicate_seeds(seed: int, count: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(count)]


def evaluate_bias(config: DGPConfig, pipeline: Callable, target: Union[Estimand, str], R: int,
                  seed: int) -> BiasResult:
    """Run ``pipeline`` on ``R`` fresh datasets and compare with each one's true estimand.

    Replicate ``r`` uses ``config`` with its seed replaced by the ``r``-th seed
    spawned from ``seed``. Feasibility verdicts for ``target`` are computed on
    the true scores; ``infeasible`` counts replicates judged infeasible.
    """
    if R < 1:
        raise ValidationError(f"R must be >= 1, got {R}")
    target = Estimand.parse(target)
    estimates, truths, labels = [], [], []
    infeasible = 0
    seeds = replicate_seeds(seed, R)
    for r, s in enumerate(seeds):
        data, pot, scores = generate(replace(config, seed=s))
        try:
            est = pipeline(data, target)
        except EstimandKitError as exc:
            raise SolverError(f"replicate {r} failed (reproduce with seed={s}): {exc}") from exc
        truths.append(true_estimands(pot, data.treatment, scores)[target])
        estimates.append(est.point)
        labels.append(str(est.estimand))
        if not overlap_report(scores, data.treatment).feasible[target]:
            infeasible += 1
    est_arr, true_arr = np.array(estimates), np.array(truths)
    bias = est_arr - true_arr
    mc_se = float(np.std(bias, ddof=1) / np.sqrt(R)) if R > 1 else float("nan")
    return BiasResult(target, float(bias.mean()), float(np.sqrt(np.mean(bias ** 2))), mc_se,
                      est_arr, true_arr, seeds, infeasible, labels)


__all__ = [
    "TABLE1", "table1", "true_estimands", "CovariateLaw", "HardRegion", "Frailty", "DGPConfig",
    "generate", "scenario_a", "scenario_b", "saturated_binary", "frailty_scenario", "SCENARIOS",
    "evaluate_bias", "BiasResult", "replicate_seeds", "ATO_DEFINITION",
]
