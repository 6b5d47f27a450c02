"""Nonparametric statistical kernel.

Rank tests share one tie convention (midranks) and return :class:`StatTestResult`.
Friedman and Kruskal-Wallis use the exact permutation distribution of the
statistic for small designs and the chi-square approximation otherwise; the
Wilcoxon signed-rank test is exact up to 20 non-zero differences. Degenerate
inputs (everything tied) give the "no effect" result instead of raising.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np
from scipy import stats as _sps

from .errors import UndefinedStatisticError

WILCOXON_EXACT_MAX_N = 20
FRIEDMAN_EXACT_LIMIT = 5_000_000  # (k!)^n permutations
KRUSKAL_EXACT_LIMIT = 100_000  # multinomial assignments


class Method(str, Enum):
    FRIEDMAN = "Friedman"
    WILCOXON = "WilcoxonSignedRank"
    KRUSKAL_WALLIS = "KruskalWallis"
    DUNN = "Dunn"
    KENDALL_TAU = "KendallTau"
    KRIPPENDORFF_ALPHA = "KrippendorffAlpha"


@dataclass(frozen=True)
class PairwiseResult:
    group_a: str
    group_b: str
    z: float
    p_value: float
    p_adjusted: float
    extras: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class StatTestResult:
    method: Method
    statistic: float
    df: int | None = None
    p_value: float | None = None
    extras: dict[str, Any] = field(default_factory=dict)
    posthoc: tuple[PairwiseResult, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method.value,
            "statistic": self.statistic,
            "df": self.df,
            "p_value": self.p_value,
            "extras": dict(self.extras),
            "posthoc": [
                {
                    "group_a": p.group_a,
                    "group_b": p.group_b,
                    "z": p.z,
                    "p_value": p.p_value,
                    "p_adjusted": p.p_adjusted,
                    **({"extras": p.extras} if p.extras else {}),
                }
                for p in self.posthoc
            ],
        }


def _clip_p(p: float) -> float:
    return float(min(1.0, max(0.0, p)))


def _as_finite(values: Any, name: str = "values") -> np.ndarray:
    x = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} must be finite")
    return x


# --------------------------------------------------------------------------- ranks


def midranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks with ties replaced by their average rank."""
    x = _as_finite(values).ravel()
    n = x.size
    if n == 0:
        raise ValueError("midranks of an empty sequence")
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    first = np.r_[True, xs[1:] != xs[:-1]]
    group = np.cumsum(first)  # 1-based tie-group index in sorted order
    counts = np.bincount(group)
    ends = np.cumsum(counts)
    avg = ends - (counts - 1) / 2.0
    ranks = np.empty(n)
    ranks[order] = avg[group]
    return ranks


def tie_sizes(values: Sequence[float]) -> np.ndarray:
    _, counts = np.unique(np.asarray(values, dtype=float), return_counts=True)
    return counts


def _tie_term(values: Sequence[float]) -> float:
    t = tie_sizes(values).astype(float)
    return float(np.sum(t**3 - t))


# --------------------------------------------------------------------------- Friedman


def _friedman_exact_sf(doubled_ranks: np.ndarray, observed_ss: int) -> float:
    """P(sum of squared column rank sums >= observed) under in-block permutation.

    Dynamic programming over blocks; the state is the vector of (doubled) column
    rank sums, weighted by how many in-block orderings reach it.
    """
    k = doubled_ranks.shape[1]
    states: Counter[tuple[int, ...]] = Counter({(0,) * k: 1})
    for row in doubled_ranks:
        perms = Counter(itertools.permutations(int(v) for v in row))
        nxt: Counter[tuple[int, ...]] = Counter()
        for state, w in states.items():
            for perm, m in perms.items():
                nxt[tuple(s + p for s, p in zip(state, perm))] += w * m
        states = nxt
    total = math.factorial(k) ** doubled_ranks.shape[0]
    hits = sum(w for state, w in states.items() if sum(s * s for s in state) >= observed_ss)
    return hits / total


def friedman_test(
    blocks: Any,
    *,
    method: str = "auto",
    exact_limit: int = FRIEDMAN_EXACT_LIMIT,
) -> StatTestResult:
    """Friedman rank-sum test for an n x k matrix (blocks x treatments), complete rows only.

    ``method`` is ``"exact"``, ``"asymptotic"`` or ``"auto"`` (exact when
    ``(k!)**n <= exact_limit``). The tie-corrected chi-square statistic is reported
    either way and the asymptotic p-value is kept in ``extras["p_asymptotic"]``.
    """
    x = _as_finite(blocks, "blocks")
    if x.ndim != 2:
        raise ValueError("blocks must be a 2-D matrix")
    n, k = x.shape
    if n < 2 or k < 2:
        raise ValueError(f"Friedman test needs n >= 2 blocks and k >= 2 treatments, got {n}x{k}")
    ranks = np.vstack([midranks(row) for row in x])
    rank_sums = ranks.sum(axis=0)
    ties = sum(_tie_term(row) for row in x)
    correction = 1.0 - ties / (n * (k**3 - k))
    extras: dict[str, Any] = {"n_blocks": n, "k": k, "rank_sums": rank_sums.tolist()}
    if correction <= 1e-12:
        extras.update(exact=False, p_asymptotic=1.0, degenerate=True)
        return StatTestResult(Method.FRIEDMAN, 0.0, k - 1, 1.0, extras)
    chi2 = (12.0 / (n * k * (k + 1)) * float(np.sum(rank_sums**2)) - 3.0 * n * (k + 1)) / correction
    chi2 = max(0.0, chi2)
    p_asym = _clip_p(_sps.chi2.sf(chi2, k - 1))
    use_exact = method == "exact" or (method == "auto" and math.factorial(k) ** n <= exact_limit)
    if method not in ("auto", "exact", "asymptotic"):
        raise ValueError(f"unknown method {method!r}")
    p = p_asym
    if use_exact:
        doubled = np.rint(2 * ranks).astype(np.int64)
        observed = int(np.sum(doubled.sum(axis=0) ** 2))
        p = _clip_p(_friedman_exact_sf(doubled, observed))
    extras.update(exact=use_exact, p_asymptotic=p_asym)
    return StatTestResult(Method.FRIEDMAN, chi2, k - 1, p, extras)


# --------------------------------------------------------------------------- Wilcoxon


def _signed_rank_exact_p(doubled_ranks: np.ndarray, t_obs: int) -> float:
    total = int(doubled_ranks.sum())
    dist = np.zeros(total + 1, dtype=np.int64)
    dist[0] = 1
    for a in doubled_ranks:
        shifted = np.zeros_like(dist)
        shifted[a:] = dist[: dist.size - a]
        dist = dist + shifted
    denom = float(2 ** doubled_ranks.size)
    lower = dist[: t_obs + 1].sum() / denom
    upper = dist[t_obs:].sum() / denom
    return _clip_p(2.0 * min(lower, upper))


def wilcoxon_signed_rank(
    x: Sequence[float],
    y: Sequence[float] | None = None,
    *,
    method: str = "auto",
) -> StatTestResult:
    """Two-sided Wilcoxon signed-rank test on paired differences ``x - y`` (or ``x``).

    Zero differences are dropped. The statistic is ``min(W+, W-)``. The p-value is
    exact (conditional on ties) for at most 20 non-zero differences, otherwise from
    the normal approximation with continuity and tie correction.
    """
    d = _as_finite(x).ravel()
    if y is not None:
        yy = _as_finite(y).ravel()
        if yy.shape != d.shape:
            raise ValueError("paired samples must have equal length")
        d = d - yy
    if d.size == 0:
        raise ValueError("Wilcoxon test needs at least one pair")
    d = d[d != 0]
    n = d.size
    if n == 0:
        return StatTestResult(
            Method.WILCOXON, 0.0, None, 1.0, {"n": 0, "w_plus": 0.0, "w_minus": 0.0, "z": 0.0, "exact": False}
        )
    r = midranks(np.abs(d))
    w_plus = float(r[d > 0].sum())
    w_minus = float(r[d < 0].sum())
    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0 - _tie_term(np.abs(d)) / 48.0
    diff = w_plus - mean
    corrected = math.copysign(max(abs(diff) - 0.5, 0.0), diff)
    z = corrected / math.sqrt(var) if var > 0 else 0.0
    p_norm = _clip_p(2.0 * _sps.norm.sf(abs(z)))
    if method not in ("auto", "exact", "asymptotic"):
        raise ValueError(f"unknown method {method!r}")
    exact = method == "exact" or (method == "auto" and n <= WILCOXON_EXACT_MAX_N)
    p = p_norm
    if exact:
        doubled = np.rint(2 * r).astype(np.int64)
        p = _signed_rank_exact_p(doubled, int(round(2 * w_plus)))
    extras = {"n": n, "w_plus": w_plus, "w_minus": w_minus, "z": z, "exact": exact, "p_asymptotic": p_norm}
    return StatTestResult(Method.WILCOXON, min(w_plus, w_minus), None, p, extras)


def bonferroni(p_values: Sequence[float], m: int | None = None) -> list[float]:
    """Bonferroni adjustment ``min(1, m * p)``; ``m`` defaults to the number of p-values."""
    m = len(p_values) if m is None else m
    if p_values and m < 1:
        raise ValueError("number of comparisons must be >= 1")
    out = []
    for p in p_values:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p-value {p} outside [0, 1]")
        out.append(min(1.0, m * p))
    return out


# --------------------------------------------------------------------------- Kruskal-Wallis / Dunn


def _groups(groups: Sequence[Sequence[float]]) -> list[np.ndarray]:
    arrs = [_as_finite(g).ravel() for g in groups]
    if len(arrs) < 2:
        raise ValueError("need at least two groups")
    for i, a in enumerate(arrs):
        if a.size == 0:
            raise ValueError(f"group {i} is empty")
    return arrs


def _kruskal_exact_sf(doubled: np.ndarray, sizes: Sequence[int], observed: int) -> float:
    """P(sum_i (2R_i)^2 * L/n_i >= observed) over all assignments of ranks to groups."""
    g = len(sizes)
    lcm = math.lcm(*sizes)
    weights = [lcm // s for s in sizes]
    states: Counter[tuple[tuple[int, ...], tuple[int, ...]]] = Counter({((0,) * g, (0,) * g): 1})
    for a in doubled:
        a = int(a)
        nxt: Counter = Counter()
        for (counts, sums), w in states.items():
            for i in range(g):
                if counts[i] < sizes[i]:
                    c = counts[:i] + (counts[i] + 1,) + counts[i + 1 :]
                    s = sums[:i] + (sums[i] + a,) + sums[i + 1 :]
                    nxt[(c, s)] += w
        states = nxt
    total = sum(states.values())
    hits = sum(w for (_, sums), w in states.items() if sum(wt * s * s for wt, s in zip(weights, sums)) >= observed)
    return hits / total


def _multinomial(sizes: Sequence[int]) -> int:
    out = math.factorial(sum(sizes))
    for s in sizes:
        out //= math.factorial(s)
    return out


def kruskal_wallis(
    groups: Sequence[Sequence[float]],
    *,
    method: str = "auto",
    exact_limit: int = KRUSKAL_EXACT_LIMIT,
) -> StatTestResult:
    """Kruskal-Wallis H test with tie correction, df = groups - 1.

    ``method="auto"`` uses the exact permutation distribution when the number of
    distinct group assignments is at most ``exact_limit``.
    """
    if method not in ("auto", "exact", "asymptotic"):
        raise ValueError(f"unknown method {method!r}")
    arrs = _groups(groups)
    sizes = [a.size for a in arrs]
    x = np.concatenate(arrs)
    big_n = x.size
    r = midranks(x)
    bounds = np.cumsum([0, *sizes])
    rank_sums = np.array([r[bounds[i] : bounds[i + 1]].sum() for i in range(len(arrs))])
    df = len(arrs) - 1
    correction = 1.0 - _tie_term(x) / (big_n**3 - big_n)
    extras: dict[str, Any] = {"sizes": sizes, "rank_sums": rank_sums.tolist()}
    if correction <= 1e-12:
        extras.update(exact=False, p_asymptotic=1.0, degenerate=True)
        return StatTestResult(Method.KRUSKAL_WALLIS, 0.0, df, 1.0, extras)
    h = (12.0 / (big_n * (big_n + 1)) * float(np.sum(rank_sums**2 / sizes)) - 3.0 * (big_n + 1)) / correction
    h = max(0.0, h)
    p_asym = _clip_p(_sps.chi2.sf(h, df))
    exact = method == "exact" or (method == "auto" and _multinomial(sizes) <= exact_limit)
    p = p_asym
    if exact:
        doubled = np.rint(2 * r).astype(np.int64)
        lcm = math.lcm(*sizes)
        dsums = [int(doubled[bounds[i] : bounds[i + 1]].sum()) for i in range(len(arrs))]
        observed = sum((lcm // s) * v * v for s, v in zip(sizes, dsums))
        p = _clip_p(_kruskal_exact_sf(doubled, sizes, observed))
    extras.update(exact=exact, p_asymptotic=p_asym)
    return StatTestResult(Method.KRUSKAL_WALLIS, h, df, p, extras)


def dunn_test(groups: Sequence[Sequence[float]], labels: Sequence[str] | None = None) -> list[PairwiseResult]:
    """Dunn's pairwise rank-sum comparisons with tie correction and Bonferroni adjustment.

    ``z`` is positive when ``group_a`` has the larger mean rank.
    """
    arrs = _groups(groups)
    labels = [str(i + 1) for i in range(len(arrs))] if labels is None else [str(s) for s in labels]
    if len(labels) != len(arrs):
        raise ValueError("one label per group required")
    x = np.concatenate(arrs)
    big_n = x.size
    r = midranks(x)
    sizes = [a.size for a in arrs]
    bounds = np.cumsum([0, *sizes])
    mean_ranks = [float(r[bounds[i] : bounds[i + 1]].mean()) for i in range(len(arrs))]
    sigma2 = big_n * (big_n + 1) / 12.0 - (_tie_term(x) / (12.0 * (big_n - 1)) if big_n > 1 else 0.0)
    pairs = list(itertools.combinations(range(len(arrs)), 2))
    raw = []
    for i, j in pairs:
        se = math.sqrt(max(sigma2, 0.0) * (1.0 / sizes[i] + 1.0 / sizes[j]))
        z = (mean_ranks[i] - mean_ranks[j]) / se if se > 0 else 0.0
        raw.append((z, _clip_p(2.0 * _sps.norm.sf(abs(z)))))
    adjusted = bonferroni([p for _, p in raw], len(pairs))
    return [
        PairwiseResult(labels[i], labels[j], z, p, pa, {"mean_rank_a": mean_ranks[i], "mean_rank_b": mean_ranks[j]})
        for (i, j), (z, p), pa in zip(pairs, raw, adjusted)
    ]


# --------------------------------------------------------------------------- Kendall


def _pairwise_complete(x: Sequence[Any], y: Sequence[Any]) -> tuple[np.ndarray, np.ndarray]:
    if len(x) != len(y):
        raise ValueError("x and y must have equal length")
    xs = np.array([np.nan if v is None else v for v in x], dtype=float)
    ys = np.array([np.nan if v is None else v for v in y], dtype=float)
    keep = np.isfinite(xs) & np.isfinite(ys)
    return xs[keep], ys[keep]


def kendall_tau(x: Sequence[Any], y: Sequence[Any]) -> StatTestResult:
    """Kendall's tau-b over pairwise-complete observations with a normal-approximation test.

    The variance of C - D is the tie-corrected one, so ``z = (C - D) / sqrt(var)``.
    ``statistic`` is tau-b; ``extras`` has ``tau``, ``z``, ``n``, ``concordant``, ``discordant``.
    """
    xs, ys = _pairwise_complete(x, y)
    n = xs.size
    if n < 2:
        raise UndefinedStatisticError(f"Kendall's tau needs at least 2 complete pairs, got {n}")
    concordant = discordant = 0
    for i in range(n - 1):
        s = np.sign(xs[i + 1 :] - xs[i]) * np.sign(ys[i + 1 :] - ys[i])
        concordant += int(np.count_nonzero(s > 0))
        discordant += int(np.count_nonzero(s < 0))
    n0 = n * (n - 1) / 2.0
    tx = tie_sizes(xs).astype(float)
    ty = tie_sizes(ys).astype(float)
    n1 = float(np.sum(tx * (tx - 1)) / 2.0)
    n2 = float(np.sum(ty * (ty - 1)) / 2.0)
    if n0 - n1 <= 0 or n0 - n2 <= 0:
        raise UndefinedStatisticError("Kendall's tau is undefined for a fully tied variable")
    s_stat = concordant - discordant
    tau = s_stat / math.sqrt((n0 - n1) * (n0 - n2))
    v0 = n * (n - 1) * (2 * n + 5)
    vt = float(np.sum(tx * (tx - 1) * (2 * tx + 5)))
    vu = float(np.sum(ty * (ty - 1) * (2 * ty + 5)))
    v1 = float(np.sum(tx * (tx - 1))) * float(np.sum(ty * (ty - 1))) / (2.0 * n * (n - 1))
    v2 = 0.0
    if n > 2:
        v2 = float(np.sum(tx * (tx - 1) * (tx - 2))) * float(np.sum(ty * (ty - 1) * (ty - 2))) / (9.0 * n * (n - 1) * (n - 2))
    var = (v0 - vt - vu) / 18.0 + v1 + v2
    z = s_stat / math.sqrt(var) if var > 0 else 0.0
    p = _clip_p(2.0 * _sps.norm.sf(abs(z)))
    extras = {"tau": tau, "z": z, "n": n, "concordant": concordant, "discordant": discordant}
    return StatTestResult(Method.KENDALL_TAU, tau, None, p, extras)


# --------------------------------------------------------------------------- Krippendorff


def _delta_squared(level: str, values: np.ndarray, marginals: np.ndarray) -> np.ndarray:
    k = values.size
    if level == "nominal":
        return 1.0 - np.eye(k)
    if level == "interval":
        return (values[:, None] - values[None, :]) ** 2
    if level == "ordinal":
        cum = np.cumsum(marginals)
        d = np.zeros((k, k))
        for c in range(k):
            for j in range(c, k):
                between = cum[j] - (cum[c - 1] if c > 0 else 0.0)
                d[c, j] = d[j, c] = (between - (marginals[c] + marginals[j]) / 2.0) ** 2
        return d
    raise ValueError(f"unknown measurement level {level!r}")


def krippendorff_alpha(ratings: Any, *, level: str = "ordinal") -> StatTestResult:
    """Krippendorff's alpha for a units x raters matrix (``None``/NaN = not rated).

    Units with fewer than two ratings carry no pairable values and are ignored.
    A sample with a single observed value (no expected disagreement) gives alpha = 1.
    """
    rows = [[np.nan if v is None else v for v in row] for row in ratings]
    if not rows:
        raise UndefinedStatisticError("no units")
    data = np.array(rows, dtype=float)
    if data.ndim != 2:
        raise ValueError("ratings must be a 2-D units x raters matrix")
    observed = data[np.isfinite(data)]
    values = np.unique(observed)
    index = {v: i for i, v in enumerate(values)}
    k = values.size
    counts = np.zeros((data.shape[0], k))
    for u, row in enumerate(data):
        for v in row[np.isfinite(row)]:
            counts[u, index[v]] += 1
    m = counts.sum(axis=1)
    pairable = m >= 2
    counts, m = counts[pairable], m[pairable]
    coincidence = np.zeros((k, k))
    for nu, mu in zip(counts, m):
        coincidence += (np.outer(nu, nu) - np.diag(nu)) / (mu - 1)
    marginals = coincidence.sum(axis=1)
    n_total = float(marginals.sum())
    if n_total < 2:
        raise UndefinedStatisticError("Krippendorff's alpha needs at least 2 pairable values")
    delta2 = _delta_squared(level, values, marginals)
    observed_dis = float(np.sum(coincidence * delta2)) / n_total
    expected_dis = float(np.sum(np.outer(marginals, marginals) * delta2)) / (n_total * (n_total - 1))
    alpha = 1.0 if expected_dis <= 0 else 1.0 - observed_dis / expected_dis
    extras = {
        "alpha": alpha,
        "level": level,
        "units": int(pairable.sum()),
        "pairable_values": int(round(n_total)),
        "d_o": observed_dis,
        "d_e": expected_dis,
    }
    return StatTestResult(Method.KRIPPENDORFF_ALPHA, alpha, None, None, extras)
