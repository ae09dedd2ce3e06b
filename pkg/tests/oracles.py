"""Brute-force reference solvers, written independently of the package."""

import itertools
import math

import numpy as np


def logit_distance(e, i, j):
    return abs(math.log(e[i] / (1 - e[i])) - math.log(e[j] / (1 - e[j])))


def brute_optimal_pairs(dist):
    """Minimum total cost over all injective row -> column maps of a cost matrix.

    Sums use math.fsum, so the result is the correctly rounded optimum of the
    given matrix entries.
    """
    rows, cols = dist.shape
    best = math.inf
    for perm in itertools.permutations(range(cols), rows):
        best = min(best, math.fsum(dist[r, c] for r, c in enumerate(perm)))
    return best


def pair_cost(ms, dist, treated, control):
    """fsum of the matrix entries used by a 1:1 match structure."""
    ti = {u: k for k, u in enumerate(treated)}
    ci = {u: k for k, u in enumerate(control)}
    return math.fsum(dist[ti[s[0]], ci[s[1]]] for s in ms.strata)


def brute_edge_cover(dist):
    """Minimum cost edge cover of the complete bipartite graph with edge costs ``dist``."""
    nr, nc = dist.shape
    edges = [(("r", i), ("c", j), dist[i, j]) for i in range(nr) for j in range(nc)]
    need = {("r", i) for i in range(nr)} | {("c", j) for j in range(nc)}
    best = math.inf
    for k in range(1, len(edges) + 1):
        for sub in itertools.combinations(edges, k):
            if {i for i, _, _ in sub} | {j for _, j, _ in sub} == need:
                best = min(best, math.fsum(c for _, _, c in sub))
    return best


def brute_cardinality(x, t, delta):
    """Largest balanced subset: max size, then max treated, then lex-max inclusion of low ids.

    Balance: |mean_T - mean_C| <= delta * pooled SD (full sample, ddof=1) per covariate.
    """
    x = np.asarray(x, dtype=float)
    treated = [i for i in range(len(t)) if t[i] == 1]
    control = [i for i in range(len(t)) if t[i] == 0]
    sd = np.sqrt((x[treated].var(axis=0, ddof=1) + x[control].var(axis=0, ddof=1)) / 2)
    best_key, best = None, None
    for mt in itertools.product((1, 0), repeat=len(treated)):
        st = [i for i, m in zip(treated, mt) if m]
        if not st:
            continue
        mean_t = x[st].mean(axis=0)
        for mc in itertools.product((1, 0), repeat=len(control)):
            sc = [i for i, m in zip(control, mc) if m]
            if not sc:
                continue
            diff = np.abs(mean_t - x[sc].mean(axis=0))
            if np.all(diff <= delta * sd):
                key = (len(st) + len(sc), len(st), mt, mc)
                if best_key is None or key > best_key:
                    best_key, best = key, tuple(sorted(st + sc))
    return best


def greedy_reference(e, dist):
    """Greedy 1:1 pairing on ``dist`` (rows treated, columns control).

    Treated rows go in descending score order ``e`` (ties by row), each taking
    the nearest free column (ties by column). Returns (row, column) pairs.
    """
    free = list(range(dist.shape[1]))
    pairs = []
    for i in sorted(range(dist.shape[0]), key=lambda i: (-e[i], i)):
        j = min(free, key=lambda j: (dist[i, j], j))
        free.remove(j)
        pairs.append((i, j))
    return sorted(pairs)


def table1_stratified():
    """Exact stratified difference in means on the ten-patient example data, by X stratum.

    Returns {"ATE", "ATT", "ATU"} as Fractions, weighting stratum contrasts by
    stratum size, treated count and untreated count.
    """
    from fractions import Fraction

    # X, T, observed Y
    rows = [(0, 1, 80), (0, 1, 80), (0, 1, 60), (1, 1, 30), (0, 0, 40), (0, 0, 40),
            (1, 0, 70), (1, 0, 50), (1, 0, 80), (1, 0, 60)]
    out = {"ATE": Fraction(0), "ATT": Fraction(0), "ATU": Fraction(0)}
    n = len(rows)
    n_t = sum(r[1] for r in rows)
    for x in (0, 1):
        y1 = [r[2] for r in rows if r[0] == x and r[1] == 1]
        y0 = [r[2] for r in rows if r[0] == x and r[1] == 0]
        diff = Fraction(sum(y1), len(y1)) - Fraction(sum(y0), len(y0))
        out["ATE"] += Fraction(len(y1) + len(y0), n) * diff
        out["ATT"] += Fraction(len(y1), n_t) * diff
        out["ATU"] += Fraction(len(y0), n - n_t) * diff
    return out
