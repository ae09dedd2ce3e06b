"""Shared data model: units, datasets, potential outcomes, estimands, weights and match structures."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ValidationError


class Estimand(str, enum.Enum):
    ATT = "ATT"
    ATU = "ATU"
    ATE = "ATE"
    ATO = "ATO"

    @classmethod
    def parse(cls, value: "str | Estimand") -> "Estimand":
        if isinstance(value, Estimand):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise ValidationError(
                f"unknown estimand {value!r}; expected one of {[e.value for e in cls]}"
            ) from None

    def __str__(self) -> str:
        return self.value


def _frozen(a, dtype=np.float64) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Unit:
    id: int
    covariates: tuple
    treatment: int
    outcome: Optional[float] = None


@dataclass(frozen=True, eq=False)
class Dataset:
    """Observed units stored column-wise.

    ``covariates`` is an ``(n, p)`` array, ``treatment`` a length-``n`` array of
    0/1 indicators and ``outcome`` either ``None`` (design stage) or a length-``n``
    array that may contain NaN for units whose outcome is missing. Unit ids are the
    0-based row positions.
    """

    covariates: np.ndarray
    treatment: np.ndarray
    covariate_names: tuple
    outcome: Optional[np.ndarray] = None

    def __post_init__(self):
        x = _frozen(self.covariates)
        if x.ndim == 1:
            x = _frozen(x.reshape(-1, 1))
        if x.ndim != 2:
            raise ValidationError("covariates must be a 2-d array (units x covariates)")
        t = _frozen(self.treatment)
        if t.shape != (x.shape[0],):
            raise ValidationError(
                f"treatment has {t.shape[0] if t.ndim else 0} entries but there are {x.shape[0]} units"
            )
        object.__setattr__(self, "covariates", x)
        object.__setattr__(self, "treatment", t)
        object.__setattr__(self, "covariate_names", tuple(str(c) for c in self.covariate_names))
        if self.outcome is not None:
            y = _frozen(self.outcome)
            if y.shape != t.shape:
                raise ValidationError(f"outcome has {y.shape[0]} entries but there are {t.shape[0]} units")
            object.__setattr__(self, "outcome", y)

    # construction -------------------------------------------------------------

    @classmethod
    def from_units(cls, units: Sequence[Unit], covariate_names: Sequence[str]) -> "Dataset":
        p = len(covariate_names)
        for pos, u in enumerate(units):
            if u.id != pos:
                raise ValidationError(f"unit ids must be the 0-based input order; position {pos} has id {u.id}")
            if len(u.covariates) != p:
                raise ValidationError(
                    f"unit {u.id} has {len(u.covariates)} covariates, expected {p} ({', '.join(covariate_names)})"
                )
        has_outcome = any(u.outcome is not None for u in units)
        y = [np.nan if u.outcome is None else u.outcome for u in units] if has_outcome else None
        x = np.array([u.covariates for u in units], dtype=float).reshape(len(units), p)
        return cls(x, [u.treatment for u in units], tuple(covariate_names), y)

    @classmethod
    def from_rows(cls, rows: Iterable[Sequence[float]], covariate_names: Sequence[str],
                  has_outcome: bool = True) -> "Dataset":
        """Build from rows laid out as ``(*covariates, treatment[, outcome])``."""
        p = len(covariate_names)
        units = []
        for i, row in enumerate(rows):
            row = tuple(row)
            width = p + 1 + int(has_outcome)
            if len(row) != width:
                raise ValidationError(f"row {i} has {len(row)} fields, expected {width}")
            units.append(Unit(i, tuple(row[:p]), row[p], row[p + 1] if has_outcome else None))
        return cls.from_units(units, covariate_names)

    def to_rows(self) -> list[tuple]:
        rows = []
        for u in self.units:
            row = tuple(_plain(v) for v in u.covariates) + (_plain(u.treatment),)
            if self.outcome is not None:
                row += (_plain(u.outcome),)
            rows.append(row)
        return rows

    # views ----------------------------------------------------------------------

    @property
    def n(self) -> int:
        return self.treatment.shape[0]

    @property
    def ids(self) -> np.ndarray:
        return np.arange(self.n)

    @property
    def treated(self) -> np.ndarray:
        return self.treatment == 1

    @property
    def untreated(self) -> np.ndarray:
        return self.treatment == 0

    @property
    def units(self) -> tuple[Unit, ...]:
        y = self.outcome
        return tuple(
            Unit(
                i,
                tuple(float(v) for v in self.covariates[i]),
                int(self.treatment[i]) if self.treatment[i] in (0, 1) else float(self.treatment[i]),
                None if y is None or math.isnan(y[i]) else float(y[i]),
            )
            for i in range(self.n)
        )

    def column(self, name: str) -> np.ndarray:
        try:
            return self.covariates[:, self.covariate_names.index(name)]
        except ValueError:
            raise ValidationError(f"no covariate named {name!r}") from None

    def subset(self, ids) -> "Dataset":
        """Rows ``ids`` as a new dataset; ids are renumbered 0..k-1 in the given order."""
        ids = np.asarray(ids, dtype=int)
        y = None if self.outcome is None else self.outcome[ids]
        return Dataset(self.covariates[ids], self.treatment[ids], self.covariate_names, y)

    def select_covariates(self, names: Sequence[str]) -> "Dataset":
        cols = [self.covariate_names.index(n) for n in names]
        y = self.outcome
        return Dataset(self.covariates[:, cols], self.treatment, tuple(names), y)

    def without_outcome(self) -> "Dataset":
        return Dataset(self.covariates, self.treatment, self.covariate_names, None)

    def with_outcome(self, outcome) -> "Dataset":
        return Dataset(self.covariates, self.treatment, self.covariate_names, outcome)

    def with_treatment(self, treatment) -> "Dataset":
        return Dataset(self.covariates, treatment, self.covariate_names, self.outcome)

    def require_outcome(self) -> np.ndarray:
        """Outcome column for estimation; fails if absent or incomplete."""
        if self.outcome is None:
            raise ValidationError("estimation requires an outcome column")
        missing = np.flatnonzero(~np.isfinite(self.outcome))
        if missing.size:
            raise ValidationError(f"outcome missing or non-finite for units {missing[:10].tolist()}")
        return self.outcome

    def require_valid(self) -> "Dataset":
        findings = validate(self)
        if findings:
            raise ValidationError("; ".join(findings))
        return self


def _plain(v):
    if v is None:
        return None
    v = float(v)
    return int(v) if v.is_integer() else v


def validate(dataset: Dataset) -> list[str]:
    """Check the dataset invariants and return one finding per violation (empty when valid)."""
    findings = []
    p = len(dataset.covariate_names)
    if dataset.covariates.shape[1] != p:
        findings.append(
            f"covariate arity {dataset.covariates.shape[1]} does not match {p} covariate names"
        )
    t = dataset.treatment
    bad_t = np.flatnonzero((t != 0) & (t != 1))
    if bad_t.size:
        findings.append(f"treatment not 0/1 for units {bad_t.tolist()}")
    finite = np.isfinite(dataset.covariates)
    for j, name in enumerate(dataset.covariate_names[: finite.shape[1]]):
        bad_x = np.flatnonzero(~finite[:, j])
        if bad_x.size:
            findings.append(f"non-finite values in covariate {name!r} for units {bad_x.tolist()}")
    if not np.any(t == 1):
        findings.append("no treated units")
    if not np.any(t == 0):
        findings.append("no untreated units")
    return findings


@dataclass(frozen=True, eq=False)
class PotentialOutcomeTable:
    """Simulation ground truth: both potential outcomes for every unit."""

    y1: np.ndarray
    y0: np.ndarray

    def __post_init__(self):
        y1, y0 = _frozen(self.y1), _frozen(self.y0)
        if y1.shape != y0.shape or y1.ndim != 1:
            raise ValidationError("y1 and y0 must be 1-d arrays of equal length")
        object.__setattr__(self, "y1", y1)
        object.__setattr__(self, "y0", y0)
        object.__setattr__(self, "_ice", _frozen(y1 - y0))

    @property
    def ice(self) -> np.ndarray:
        return self._ice

    def __len__(self) -> int:
        return self.y1.shape[0]


def observed_from_potential(pot: PotentialOutcomeTable, treatments) -> np.ndarray:
    """Reveal the potential outcome matching each unit's treatment."""
    t = np.asarray(treatments)
    if t.shape != pot.y1.shape:
        raise ValidationError(f"{t.shape[0] if t.ndim else 0} treatments for {len(pot)} units")
    return np.where(t == 1, pot.y1, pot.y0)


@dataclass(frozen=True, eq=False)
class WeightVector:
    """Per-unit nonnegative weights tagged with the estimand they target."""

    weights: np.ndarray
    target: Estimand
    provenance: str
    notes: tuple = ()

    def __post_init__(self):
        w = _frozen(self.weights)
        if w.ndim != 1:
            raise ValidationError("weights must be 1-d")
        bad = np.flatnonzero(~np.isfinite(w) | (w < 0))
        if bad.size:
            raise ValidationError(f"weights must be finite and nonnegative; offending units {bad[:10].tolist()}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "target", Estimand.parse(self.target))
        object.__setattr__(self, "notes", tuple(self.notes))

    def __len__(self) -> int:
        return self.weights.shape[0]

    def scaled(self, c: float) -> "WeightVector":
        return WeightVector(self.weights * c, self.target, self.provenance, self.notes)

    def check_usable(self, treatment) -> None:
        """Both groups must keep some positive weight."""
        t = np.asarray(treatment)
        if len(t) != len(self):
            raise ValidationError(f"{len(self)} weights for {len(t)} units")
        for label, mask in (("treated", t == 1), ("untreated", t == 0)):
            if not np.any(self.weights[mask] > 0):
                raise ValidationError(f"no {label} unit has positive weight")


@dataclass(frozen=True)
class MatchStructure:
    """Strata (disjoint groups mixing both treatment arms) plus discarded unit ids.

    ``focal`` names the group whose units were each matched (``"treated"`` or
    ``"untreated"``) for pair-type methods, and is ``None`` for stratifications.
    """

    strata: tuple
    discarded: tuple
    method: str
    focal: Optional[str] = None
    distance: float = field(default=0.0, compare=False)

    def __post_init__(self):
        strata = tuple(tuple(sorted(int(i) for i in s)) for s in self.strata)
        object.__setattr__(self, "strata", strata)
        object.__setattr__(self, "discarded", tuple(sorted(int(i) for i in self.discarded)))

    @property
    def n_strata(self) -> int:
        return len(self.strata)

    def retained(self) -> np.ndarray:
        return np.array(sorted(i for s in self.strata for i in s), dtype=int)

    def stratum_index(self, n: int) -> np.ndarray:
        """Stratum number per unit, -1 for units in no stratum."""
        idx = np.full(n, -1, dtype=int)
        for k, s in enumerate(self.strata):
            idx[list(s)] = k
        return idx

    def check(self, treatment) -> list[str]:
        """Structural findings against the invariants; empty when valid."""
        t = np.asarray(treatment)
        findings = []
        seen: set[int] = set()
        for k, s in enumerate(self.strata):
            if seen.intersection(s):
                findings.append(f"stratum {k} overlaps an earlier stratum")
            seen.update(s)
            arms = {int(t[i]) for i in s}
            if arms != {0, 1}:
                findings.append(f"stratum {k} lacks a treatment group")
        if seen.intersection(self.discarded):
            findings.append("a discarded unit also appears in a stratum")
        everything = seen.union(self.discarded)
        if everything and (min(everything) < 0 or max(everything) >= len(t)):
            findings.append("unit id out of range")
        return findings
