"""Matching designs and their conversion to weights.

Pair methods (greedy and optimal) match each focal unit to ``ratio`` units of
the other group without replacement. The focal group is the treated for the
ATT and the untreated for the ATU; the ATU case is handled by mirroring
(swapping group labels and replacing e by 1 - e).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Mapping, Optional, Union

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import Dataset, Estimand, MatchStructure, WeightVector
from .errors import EstimandRelabelWarning, IncompatibleEstimandError, ValidationError
from .propensity import logit

PAIR_METHODS = ("greedy-pair", "optimal-pair")
DEFAULT_CALIPER = 0.2
EXACT_CARDINALITY_LIMIT = 30


@dataclass(frozen=True)
class MatchSpec:
    """Parameters shared by the matching methods.

    caliper
        Maximum allowed |difference in logit score|, as a multiple of the
        standard deviation of the logit scores. ``None`` means no caliper.
    tolerance
        Cardinality matching balance bound on |SMD|; a single number applies
        to every covariate, a mapping gives one bound per covariate name.
    """

    method: str = "greedy-pair"
    distance: str = "logit"
    caliper: Optional[float] = None
    ratio: int = 1
    strata_count: int = 5
    bins: Optional[int] = None
    tolerance: Union[float, Mapping[str, float], None] = None
    target: Estimand = Estimand.ATT

    def __post_init__(self):
        object.__setattr__(self, "target", Estimand.parse(self.target))
        if self.distance not in ("logit", "euclidean"):
            raise ValidationError(f"distance must be 'logit' or 'euclidean', got {self.distance!r}")
        if self.caliper is not None and not (self.caliper > 0):
            raise ValidationError(f"caliper must be > 0, got {self.caliper}")
        if int(self.ratio) != self.ratio or self.ratio < 1:
            raise ValidationError(f"ratio must be an integer >= 1, got {self.ratio}")
        if int(self.strata_count) != self.strata_count or self.strata_count < 1:
            raise ValidationError(f"strata_count must be an integer >= 1, got {self.strata_count}")
        if self.bins is not None and (int(self.bins) != self.bins or self.bins < 1):
            raise ValidationError(f"bins must be a positive integer, got {self.bins}")
        tol = self.tolerance
        values = tol.values() if isinstance(tol, Mapping) else ([] if tol is None else [tol])
        for v in values:
            if not (v > 0):
                raise ValidationError(f"balance tolerance must be > 0, got {v}")


# --------------------------------------------------------------------------
# distances


# Distances live on a dyadic grid so that every sum and difference formed by
# the solvers is exact in float64; ties are then true ties.
GRID = 2.0 ** -30


def _on_grid(v: np.ndarray) -> np.ndarray:
    return np.round(np.asarray(v, dtype=float) / GRID) * GRID


def _grid_logit(scores) -> np.ndarray:
    return _on_grid(logit(scores))


def _covariate_scale(x: np.ndarray) -> np.ndarray:
    sd = x.std(axis=0, ddof=1) if x.shape[0] > 1 else np.ones(x.shape[1])
    return np.where(sd > 0, sd, 1.0)


def distance_matrix(dataset: Dataset, scores, rows, cols, distance: str = "logit") -> np.ndarray:
    """Distances between units ``rows`` and units ``cols``, rounded to multiples of :data:`GRID`."""
    rows, cols = np.asarray(rows, dtype=int), np.asarray(cols, dtype=int)
    if distance == "logit":
        lg = _grid_logit(scores)
        return np.abs(lg[rows][:, None] - lg[cols][None, :])
    z = dataset.covariates / _covariate_scale(dataset.covariates)
    diff = z[rows][:, None, :] - z[cols][None, :, :]
    return _on_grid(np.sqrt(np.sum(diff * diff, axis=2)))


def caliper_width(scores, caliper: Optional[float]) -> float:
    if caliper is None:
        return math.inf
    lg = logit(scores)
    return caliper * float(np.std(lg, ddof=1)) if lg.size > 1 else 0.0


def _allowed(scores, rows, cols, width: float) -> np.ndarray:
    if math.isinf(width):
        return np.ones((len(rows), len(cols)), dtype=bool)
    lg = _grid_logit(scores)
    return np.abs(lg[rows][:, None] - lg[cols][None, :]) <= width


def _groups(dataset: Dataset, scores, target: Estimand):
    e = np.asarray(scores, dtype=float)
    if e.shape != (dataset.n,):
        raise ValidationError(f"{e.size} scores for {dataset.n} units")
    if target is Estimand.ATT:
        return "treated", np.flatnonzero(dataset.treated), np.flatnonzero(dataset.untreated), e
    if target is Estimand.ATU:
        return "untreated", np.flatnonzero(dataset.untreated), np.flatnonzero(dataset.treated), 1 - e
    raise IncompatibleEstimandError(
        f"pair matching targets the ATT or ATU (or the ATO with a caliper), not the {target}"
    )


def _pair_setup(dataset: Dataset, scores, spec: MatchSpec):
    dataset.require_valid()
    focal_name, focal, pool, focal_score = _groups(dataset, scores, spec.target)
    if len(pool) < spec.ratio * len(focal):
        other = "untreated" if focal_name == "treated" else "treated"
        raise ValidationError(
            f"matching without replacement needs at least {spec.ratio} x {len(focal)} {other} units, "
            f"found {len(pool)}; the focal ({focal_name}) group must be the smaller one"
        )
    dist = distance_matrix(dataset, scores, focal, pool, spec.distance)
    allowed = _allowed(scores, focal, pool, caliper_width(scores, spec.caliper))
    return focal_name, focal, pool, focal_score, dist, allowed


def _pair_structure(method, focal_name, focal, pool, matches, dist_total) -> MatchStructure:
    strata, discarded = [], []
    used = set()
    for i, ctrl in zip(focal, matches):
        if ctrl:
            strata.append((int(i), *ctrl))
            used.update(ctrl)
        else:
            discarded.append(int(i))
    if not strata:
        raise ValidationError(f"every {focal_name} unit was discarded by the caliper")
    discarded.extend(int(j) for j in pool if int(j) not in used)
    return MatchStructure(tuple(strata), tuple(discarded), method, focal_name, dist_total)


def greedy_nn(dataset: Dataset, scores, spec: MatchSpec) -> MatchStructure:
    """Greedy nearest-neighbour pair matching without replacement.

    Focal units are processed hardest first (descending score toward the other
    group, ties by lowest id); each takes the ``ratio`` nearest unmatched units
    of the other group, ties by lowest id. With a caliper, focal units with no
    eligible partner are discarded.
    """
    focal_name, focal, pool, focal_score, dist, allowed = _pair_setup(dataset, scores, spec)
    order = sorted(range(len(focal)), key=lambda k: (-focal_score[focal[k]], focal[k]))
    free = np.ones(len(pool), dtype=bool)
    matches: list[tuple] = [()] * len(focal)
    total = 0.0
    for k in order:
        ok = np.flatnonzero(free & allowed[k])
        if ok.size == 0:
            continue
        # pool is sorted by id, so a stable sort on distance breaks ties by lowest id
        pick = ok[np.argsort(dist[k, ok], kind="stable")[: spec.ratio]]
        free[pick] = False
        matches[k] = tuple(int(pool[j]) for j in pick)
        total += float(dist[k, pick].sum())
    return _pair_structure("greedy-pair", focal_name, focal, pool, matches, total)


def optimal_pair(dataset: Dataset, scores, spec: MatchSpec) -> MatchStructure:
    """Pair matching minimizing the total matched distance (min-cost assignment).

    Each focal unit is replicated ``ratio`` times as an assignment row. Pairs
    outside the caliper carry a penalty exceeding any feasible total, so the
    solver first maximizes the number of admissible pairs, then minimizes
    distance; inadmissible assignments are dropped afterwards.
    """
    focal_name, focal, pool, _, dist, allowed = _pair_setup(dataset, scores, spec)
    finite = dist[allowed]
    big = (float(finite.max()) + 1.0) * (len(focal) * spec.ratio + 1) if finite.size else 1.0
    cost = np.where(allowed, dist, big)
    cost = np.repeat(cost, spec.ratio, axis=0)
    rows, cols = linear_sum_assignment(cost)
    matches: list[list[int]] = [[] for _ in focal]
    total = 0.0
    for r, c in zip(rows, cols):
        k = r // spec.ratio
        if allowed[k, c]:
            matches[k].append(int(pool[c]))
            total += float(dist[k, c])
    return _pair_structure("optimal-pair", focal_name, focal, pool,
                           [tuple(sorted(m)) for m in matches], total)


# --------------------------------------------------------------------------
# full matching


def _stratum_distance(strata, t_index, c_index, dist) -> float:
    total = 0.0
    for s in strata:
        ti = [t_index[i] for i in s if i in t_index]
        ci = [c_index[i] for i in s if i in c_index]
        total += float(dist[np.ix_(ti, ci)].sum())
    return total


def full_matching(dataset: Dataset, scores, spec: Optional[MatchSpec] = None) -> MatchStructure:
    """Optimal full matching.

    Every retained unit lands in a stratum with at least one unit of the other
    group, and the sum of within-stratum treated-control distances is
    minimal. The optimum is a minimum-cost edge cover of the bipartite
    treated/untreated graph, found through the standard reduction to a
    min-cost matching on the reduced costs d(i, j) - m(i) - m(j), where m(v)
    is the cheapest edge at v. Strata are the stars of the cover; strata whose
    union adds no distance are merged, so units with identical scores share a
    stratum.
    """
    spec = spec or MatchSpec(method="full")
    dataset.require_valid()
    treated = np.flatnonzero(dataset.treated)
    control = np.flatnonzero(dataset.untreated)
    dist = distance_matrix(dataset, scores, treated, control, spec.distance)
    allowed = _allowed(scores, treated, control, caliper_width(scores, spec.caliper))

    keep_t = allowed.any(axis=1)
    keep_c = allowed.any(axis=0)
    discarded = [int(i) for i in treated[~keep_t]] + [int(j) for j in control[~keep_c]]
    if not keep_t.any():
        raise ValidationError("full matching is infeasible under the caliper: no treated unit has a partner")
    ti, ci = np.flatnonzero(keep_t), np.flatnonzero(keep_c)
    d = dist[np.ix_(ti, ci)]
    ok = allowed[np.ix_(ti, ci)]
    masked = np.where(ok, d, np.inf)

    # cheapest admissible edge per vertex, ties to the lowest id
    best_c_for_t = np.argmin(masked, axis=1)
    best_t_for_c = np.argmin(masked, axis=0)
    m_t = masked[np.arange(len(ti)), best_c_for_t]
    m_c = masked[best_t_for_c, np.arange(len(ci))]
    reduced = np.where(ok, d - m_t[:, None] - m_c[None, :], 0.0)
    reduced = np.minimum(reduced, 0.0)
    rows, cols = linear_sum_assignment(reduced)

    edges = set()
    covered_t, covered_c = set(), set()
    for r, c in zip(rows, cols):
        if reduced[r, c] < 0:
            edges.add((int(r), int(c)))
            covered_t.add(int(r))
            covered_c.add(int(c))
    for r in range(len(ti)):
        if r not in covered_t:
            edges.add((r, int(best_c_for_t[r])))
    for c in range(len(ci)):
        if c not in covered_c:
            edges.add((int(best_t_for_c[c]), c))

    edges = _prune_to_stars(edges, d)
    strata = _components(edges, ti, ci, treated, control)
    strata = _merge_free(strata, treated, control, dist)
    t_index = {int(u): k for k, u in enumerate(treated)}
    c_index = {int(u): k for k, u in enumerate(control)}
    total = _stratum_distance(strata, t_index, c_index, dist)
    return MatchStructure(tuple(strata), tuple(discarded), "full-matching", None, total)


def _prune_to_stars(edges: set, d: np.ndarray) -> set:
    """Drop edges joining two vertices that are both otherwise covered."""
    deg_t: dict[int, int] = {}
    deg_c: dict[int, int] = {}
    for r, c in edges:
        deg_t[r] = deg_t.get(r, 0) + 1
        deg_c[c] = deg_c.get(c, 0) + 1
    for r, c in sorted(edges, key=lambda e: (-d[e], e)):
        if deg_t[r] > 1 and deg_c[c] > 1:
            edges = edges - {(r, c)}
            deg_t[r] -= 1
            deg_c[c] -= 1
    return edges


def _components(edges, ti, ci, treated, control) -> list[tuple]:
    parent: dict = {}

    def find(a):
        while parent.setdefault(a, a) != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for r, c in edges:
        parent[find(("t", r))] = find(("c", c))
    groups: dict = {}
    for r, c in edges:
        root = find(("t", r))
        groups.setdefault(root, set()).update((int(treated[ti[r]]), int(control[ci[c]])))
    return sorted((tuple(sorted(g)) for g in groups.values()), key=lambda s: s[0])


def _merge_free(strata, treated, control, dist) -> list[tuple]:
    """Merge strata whose cross treated-control distances are all zero."""
    t_index = {int(u): k for k, u in enumerate(treated)}
    c_index = {int(u): k for k, u in enumerate(control)}
    parts = [list(s) for s in strata]
    merged = True
    while merged:
        merged = False
        for a in range(len(parts)):
            ta = [t_index[i] for i in parts[a] if i in t_index]
            ca = [c_index[i] for i in parts[a] if i in c_index]
            for b in range(a + 1, len(parts)):
                tb = [t_index[i] for i in parts[b] if i in t_index]
                cb = [c_index[i] for i in parts[b] if i in c_index]
                if not dist[np.ix_(ta, cb)].any() and not dist[np.ix_(tb, ca)].any():
                    parts[a] = sorted(parts[a] + parts.pop(b))
                    merged = True
                    break
            if merged:
                break
    return sorted((tuple(p) for p in parts), key=lambda s: s[0])


# --------------------------------------------------------------------------
# stratification


def _strata_from_labels(labels, treatment, method) -> MatchStructure:
    groups: dict = {}
    for i, lab in enumerate(labels):
        groups.setdefault(lab, []).append(i)
    strata, discarded = [], []
    for members in sorted(groups.values(), key=lambda g: g[0]):
        arms = {int(treatment[i]) for i in members}
        if arms == {0, 1}:
            strata.append(tuple(members))
        else:
            discarded.extend(members)
    if not strata:
        raise ValidationError(f"{method}: no stratum contains both treated and untreated units")
    return MatchStructure(tuple(strata), tuple(discarded), method)


def fine_stratification(dataset: Dataset, scores, spec: Optional[MatchSpec] = None) -> MatchStructure:
    """Bin units into ``strata_count`` propensity score quantile strata.

    Bin edges are the pooled-sample score quantiles; a unit sitting exactly on an
    edge goes to the lower bin. Strata missing either group are discarded.
    """
    spec = spec or MatchSpec(method="fine")
    dataset.require_valid()
    e = np.asarray(scores, dtype=float)
    k = spec.strata_count
    distinct = np.unique(e).size
    if k > distinct:
        raise ValidationError(f"strata_count {k} exceeds the {distinct} distinct propensity scores")
    inner = np.quantile(e, np.arange(1, k) / k)
    labels = np.searchsorted(inner, e, side="left")
    return _strata_from_labels(labels.tolist(), dataset.treatment, "fine-stratification")


def sturges_bins(n: int) -> int:
    return int(math.ceil(math.log2(n) + 1)) if n > 0 else 1


def coarsen(dataset: Dataset, bins: Optional[int] = None) -> np.ndarray:
    """Coarsened covariate signature per unit (binary columns kept exact)."""
    x = dataset.covariates
    nb = bins or sturges_bins(dataset.n)
    out = np.empty_like(x, dtype=np.int64)
    for j in range(x.shape[1]):
        col = x[:, j]
        if np.all((col == 0) | (col == 1)):
            out[:, j] = col.astype(np.int64)
            continue
        lo, hi = col.min(), col.max()
        if hi == lo:
            out[:, j] = 0
            continue
        width = (hi - lo) / nb
        out[:, j] = np.minimum(np.floor((col - lo) / width), nb - 1).astype(np.int64)
    return out


def cem(dataset: Dataset, spec: Optional[MatchSpec] = None) -> MatchStructure:
    """Coarsened exact matching: exact strata on coarsened covariates.

    Continuous covariates are cut into equal-width bins over their observed
    range (Sturges' count unless ``spec.bins`` is set); binary covariates stay
    exact.
    """
    spec = spec or MatchSpec(method="cem")
    dataset.require_valid()
    if not dataset.covariate_names:
        raise ValidationError("coarsened exact matching needs at least one covariate")
    sig = coarsen(dataset, spec.bins)
    labels = [tuple(row) for row in sig.tolist()]
    return _strata_from_labels(labels, dataset.treatment, "cem")


# --------------------------------------------------------------------------
# cardinality matching


def _tolerances(dataset: Dataset, tolerance) -> np.ndarray:
    names = dataset.covariate_names
    if tolerance is None:
        raise ValidationError("cardinality matching needs a balance tolerance per covariate")
    if isinstance(tolerance, Mapping):
        missing = [n for n in names if n not in tolerance]
        if missing:
            raise ValidationError(f"no balance tolerance for covariates {missing}")
        return np.array([float(tolerance[n]) for n in names])
    return np.full(len(names), float(tolerance))


def pooled_sd(dataset: Dataset) -> np.ndarray:
    """Unweighted pooled SD sqrt((s_T^2 + s_C^2) / 2) per covariate, ddof=1."""
    x = dataset.covariates
    xt, xc = x[dataset.treated], x[dataset.untreated]
    vt = xt.var(axis=0, ddof=1) if len(xt) > 1 else np.zeros(x.shape[1])
    vc = xc.var(axis=0, ddof=1) if len(xc) > 1 else np.zeros(x.shape[1])
    return np.sqrt((vt + vc) / 2)


class _Balance:
    """Feasibility test shared by the exact and heuristic cardinality solvers."""

    def __init__(self, dataset: Dataset, tolerance):
        self.x = dataset.covariates
        self.delta = _tolerances(dataset, tolerance)
        s = pooled_sd(dataset)
        self.scale = np.where(s > 0, s, 1.0)
        # |diff| <= delta * scale is the constraint; a zero pooled SD forces diff == 0
        self.bound = np.where(s > 0, self.delta * self.scale, 0.0)

    def smd(self, sel_t, sel_c) -> np.ndarray:
        diff = self.x[sel_t].mean(axis=0) - self.x[sel_c].mean(axis=0)
        return diff / self.scale

    def feasible(self, sel_t, sel_c) -> bool:
        diff = self.x[sel_t].mean(axis=0) - self.x[sel_c].mean(axis=0)
        return bool(np.all(np.abs(diff) <= self.bound))

    def worst(self, sel_t, sel_c) -> float:
        diff = np.abs(self.x[sel_t].mean(axis=0) - self.x[sel_c].mean(axis=0))
        excess = np.where(self.bound > 0, diff / np.where(self.bound > 0, self.bound, 1.0),
                          np.where(diff > 0, np.inf, 0.0))
        return float(excess.max()) if excess.size else 0.0


def cardinality_matching(dataset: Dataset, spec: MatchSpec, exact: Optional[bool] = None) -> MatchStructure:
    """Largest subset whose covariate SMDs all satisfy |SMD| <= tolerance.

    The objective is the retained count, then the retained treated count; the
    remaining ties go to the subset that keeps the lowest-id treated units,
    then the lowest-id untreated units. SMDs use the unweighted full-sample
    pooled SD. Groups of at most 30 units are solved exactly by
    branch-and-bound; larger problems use greedy removal plus swap search.
    """
    dataset.require_valid()
    bal = _Balance(dataset, spec.tolerance)
    treated = np.flatnonzero(dataset.treated)
    control = np.flatnonzero(dataset.untreated)
    if exact is None:
        exact = max(len(treated), len(control)) <= EXACT_CARDINALITY_LIMIT
    if exact:
        sel_t, sel_c = _cardinality_exact(bal, treated, control)
        method = "cardinality-matching(exact)"
    else:
        sel_t, sel_c = _cardinality_heuristic(bal, treated, control)
        method = "cardinality-matching(heuristic)"
    chosen = set(sel_t) | set(sel_c)
    stratum = tuple(sorted(chosen))
    discarded = tuple(i for i in range(dataset.n) if i not in chosen)
    return MatchStructure((stratum,), discarded, method)


def _cardinality_exact(bal: _Balance, treated, control):
    nt, nc = len(treated), len(control)
    x = bal.x
    p = x.shape[1]
    slack = 1e-9 * (1.0 + np.abs(bal.bound))

    def suffix_tables(ids):
        # tables[k] = (prefix sums of ascending, prefix sums of descending) for ids[k:]
        tables = []
        for k in range(len(ids) + 1):
            vals = np.sort(x[ids[k:]], axis=0)
            zero = np.zeros((1, p))
            lo = np.vstack([zero, np.cumsum(vals, axis=0)])
            hi = np.vstack([zero, np.cumsum(vals[::-1], axis=0)])
            tables.append((lo, hi))
        return tables

    tab_t, tab_c = suffix_tables(treated), suffix_tables(control)

    def possible(a, b, k_t, sum_t, need_t, k_c, sum_c, need_c):
        lo_t = sum_t + tab_t[k_t][0][need_t]
        hi_t = sum_t + tab_t[k_t][1][need_t]
        lo_c = sum_c + tab_c[k_c][0][need_c]
        hi_c = sum_c + tab_c[k_c][1][need_c]
        lo = lo_t / a - hi_c / b
        hi = hi_t / a - lo_c / b
        return bool(np.all(lo <= bal.bound + slack) and np.all(hi >= -bal.bound - slack))

    def search(a, b):
        chosen_t: list[int] = []
        chosen_c: list[int] = []
        zero = np.zeros(p)

        def walk_c(k, sum_t, sum_c):
            need = b - len(chosen_c)
            if need == 0:
                return bal.feasible(treated[chosen_t], control[chosen_c])
            if nc - k < need or not possible(a, b, nt, sum_t, 0, k, sum_c, need):
                return False
            chosen_c.append(k)
            if walk_c(k + 1, sum_t, sum_c + x[control[k]]):
                return True
            chosen_c.pop()
            return walk_c(k + 1, sum_t, sum_c)

        def walk_t(k, sum_t):
            need = a - len(chosen_t)
            if need == 0:
                return walk_c(0, sum_t, zero)
            if nt - k < need or not possible(a, b, k, sum_t, need, 0, zero, b):
                return False
            chosen_t.append(k)
            if walk_t(k + 1, sum_t + x[treated[k]]):
                return True
            chosen_t.pop()
            return walk_t(k + 1, sum_t)

        if walk_t(0, zero):
            return [int(treated[k]) for k in chosen_t], [int(control[k]) for k in chosen_c]
        return None

    for a, b in sorted(((a, b) for a in range(1, nt + 1) for b in range(1, nc + 1)),
                       key=lambda ab: (-(ab[0] + ab[1]), -ab[0])):
        found = search(a, b)
        if found is not None:
            return found
    raise ValidationError("cardinality matching: no subset with both groups satisfies the balance tolerance")


def _cardinality_heuristic(bal: _Balance, treated, control):
    in_t = np.ones(len(treated), dtype=bool)
    in_c = np.ones(len(control), dtype=bool)

    def worst():
        return bal.worst(treated[in_t], control[in_c])

    # greedy removal
    while worst() > 1.0:
        best = None
        for group, mask, ids in ((0, in_t, treated), (1, in_c, control)):
            if mask.sum() <= 1:
                continue
            for k in np.flatnonzero(mask):
                mask[k] = False
                val = worst()
                mask[k] = True
                key = (val, int(ids[k]))
                if best is None or key < best[0]:
                    best = (key, group, k)
        if best is None:
            raise ValidationError("cardinality matching: no subset with both groups satisfies the balance tolerance")
        _, group, k = best
        (in_t if group == 0 else in_c)[k] = False

    # local search: additions first, then improving swaps
    improved = True
    while improved:
        improved = False
        for group, mask in ((0, in_t), (1, in_c)):
            for k in np.flatnonzero(~mask):
                mask[k] = True
                if worst() <= 1.0:
                    improved = True
                    break
                mask[k] = False
            if improved:
                break
        if improved:
            continue
        current = worst()
        best = None
        for group, mask in ((0, in_t), (1, in_c)):
            for out_k in np.flatnonzero(mask):
                for in_k in np.flatnonzero(~mask):
                    mask[out_k], mask[in_k] = False, True
                    val = worst()
                    mask[out_k], mask[in_k] = True, False
                    if val < current and (best is None or val < best[0]):
                        best = (val, mask, out_k, in_k)
        if best is not None:
            _, mask, out_k, in_k = best
            mask[out_k], mask[in_k] = False, True
            improved = True
    return [int(i) for i in treated[in_t]], [int(i) for i in control[in_c]]


# --------------------------------------------------------------------------
# weights from match structures


def match_to_weights(ms: MatchStructure, target: Union[Estimand, str], treatments) -> WeightVector:
    """Weights that reproduce the matched/stratified design for ``target``.

    Within a stratum with t treated and c untreated units:

    * ATT: treated 1, untreated (t / c) * (retained untreated / retained treated)
    * ATU: the mirror image
    * ATE: every unit (t + c) / (its group count in the stratum)

    Discarded units get 0. Discarding any unit of the target population
    relabels the result as ATO (with an :class:`EstimandRelabelWarning`); the
    ATO weights then describe the retained sample (pair designs keep the
    focal group fixed, stratifications reweight both groups to the retained
    stratum distribution).
    """
    target = Estimand.parse(target)
    t = np.asarray(treatments)
    findings = ms.check(t)
    if findings:
        raise ValidationError(f"invalid match structure: {'; '.join(findings)}")
    if ms.focal is not None:
        if target is Estimand.ATE:
            raise IncompatibleEstimandError(
                "pair matching cannot target the ATE: the matched sample resembles one group, not the full sample"
            )
        if (target, ms.focal) in ((Estimand.ATT, "untreated"), (Estimand.ATU, "treated")):
            raise IncompatibleEstimandError(
                f"a design matched on the {ms.focal} group cannot target the {target}"
            )

    effective, style, notes = resolve_target(ms, target, t)
    if notes:
        warnings.warn(notes[0], EstimandRelabelWarning, stacklevel=2)

    w = np.zeros(len(t))
    retained = ms.retained()
    n_t = int(np.sum(t[retained] == 1))
    n_c = int(np.sum(t[retained] == 0))
    for s in ms.strata:
        s = np.array(s, dtype=int)
        is_t = t[s] == 1
        ts, cs = int(is_t.sum()), int((~is_t).sum())
        if style is Estimand.ATT:
            w[s] = np.where(is_t, 1.0, (ts / cs) * (n_c / n_t))
        elif style is Estimand.ATU:
            w[s] = np.where(is_t, (cs / ts) * (n_t / n_c), 1.0)
        else:
            w[s] = np.where(is_t, (ts + cs) / ts, (ts + cs) / cs)
    return WeightVector(w, effective, f"{ms.method}->{target}", notes)


def resolve_target(ms: MatchStructure, target: Estimand, treatments):
    """Estimand actually targeted by ``ms`` and the weighting style that realizes it.

    Returns ``(effective, style, notes)``. ``effective`` is ``target`` unless
    units of the target population were discarded, in which case it is ATO.
    ``style`` is the ATT/ATU/ATE formula used for the retained units.
    """
    t = np.asarray(treatments)
    discarded = np.array(ms.discarded, dtype=int)
    lost = {
        Estimand.ATT: bool(discarded.size and np.any(t[discarded] == 1)),
        Estimand.ATU: bool(discarded.size and np.any(t[discarded] == 0)),
        Estimand.ATE: bool(discarded.size),
        Estimand.ATO: False,
    }[target]
    if not lost:
        effective, notes = target, ()
    else:
        effective = Estimand.ATO
        notes = (f"{ms.method} discarded units of the {target} target population; "
                 f"estimand relabeled {target} -> ATO",)
    style = effective
    if effective is Estimand.ATO:
        style = {"treated": Estimand.ATT, "untreated": Estimand.ATU}.get(ms.focal, Estimand.ATE)
    return effective, style, notes


def run_matching(dataset: Dataset, scores, spec: MatchSpec) -> MatchStructure:
    """Dispatch on ``spec.method``."""
    method = spec.method
    if method in ("greedy", "greedy-pair", "pair-matching", "nearest-neighbor", "caliper-matching"):
        return greedy_nn(dataset, scores, spec)
    if method in ("optimal", "optimal-pair", "optimal-pair-matching"):
        return optimal_pair(dataset, scores, spec)
    if method in ("full", "full-matching"):
        return full_matching(dataset, scores, spec)
    if method in ("fine", "fine-stratification"):
        return fine_stratification(dataset, scores, spec)
    if method == "cem":
        return cem(dataset, spec)
    if method in ("cardinality", "cardinality-matching"):
        return cardinality_matching(dataset, spec)
    raise ValidationError(f"unknown matching method {method!r}")
