"""McNemar's test and the Wilcoxon signed-rank test, exact for small samples."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class TestResult:
    name: str
    statistic: float
    p_value: float
    branch: str
    n: int
    degenerate: bool = False

    __test__ = False  # not a pytest class


def chi2_sf_1dof(x: float) -> float:
    return math.erfc(math.sqrt(max(x, 0.0) / 2.0))


def binom_two_sided(k: int, n: int) -> float:
    """Two-sided exact binomial p for ``k`` successes out of ``n`` at p=0.5."""
    if n == 0:
        return 1.0
    lo = min(k, n - k)
    tail = sum(math.comb(n, i) for i in range(lo + 1)) / 2.0**n
    return min(1.0, 2.0 * tail)


def mcnemar(n01: int, n10: int, exact_below: int = 25, method: str = "auto") -> TestResult:
    """Paired binary outcomes; only the discordant counts matter.

    ``method`` is ``auto`` (exact when ``n01 + n10 < exact_below``),
    ``exact`` or ``chi2`` (continuity corrected).
    """
    if n01 < 0 or n10 < 0:
        raise ValueError("counts must be non-negative")
    n = n01 + n10
    if n == 0:
        return TestResult("mcnemar", 0.0, 1.0, "empty", 0, degenerate=True)
    if method == "auto":
        method = "exact" if n < exact_below else "chi2"
    if method == "exact":
        return TestResult("mcnemar", float(min(n01, n10)), binom_two_sided(n01, n), "exact", n)
    if method == "chi2":
        # clamped so balanced counts give 0 rather than 1/n
        stat = max(abs(n01 - n10) - 1.0, 0.0) ** 2 / n
        return TestResult("mcnemar", stat, min(1.0, chi2_sf_1dof(stat)), "chi2", n)
    raise ValueError(f"unknown method {method!r}")


def mcnemar_from_correct(correct1: Sequence[bool], correct2: Sequence[bool], **kw) -> TestResult:
    c1, c2 = np.asarray(correct1, dtype=bool), np.asarray(correct2, dtype=bool)
    if c1.shape != c2.shape:
        raise ValueError("paired correctness vectors differ in length")
    return mcnemar(int((~c1 & c2).sum()), int((c1 & ~c2).sum()), **kw)


def rank_abs(d: np.ndarray) -> np.ndarray:
    """Ranks of ``|d|`` from 1, ties receiving their average rank."""
    a = np.abs(d)
    order = np.argsort(a, kind="mergesort")
    ranks = np.empty(len(a), dtype=float)
    sorted_a = a[order]
    i = 0
    while i < len(a):
        j = i
        while j + 1 < len(a) and sorted_a[j + 1] == sorted_a[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _signed_rank_counts(n: int) -> list[int]:
    """counts[w] = number of sign patterns on ranks 1..n with positive-rank sum w."""
    total = n * (n + 1) // 2
    counts = [1] + [0] * total
    for r in range(1, n + 1):
        for w in range(total, r - 1, -1):
            counts[w] += counts[w - r]
    return counts


def wilcoxon_signed_rank(x: Sequence[float], y: Sequence[float], exact_below: int = 26,
                         method: str = "auto", n_resamples: int = 20000,
                         seed: int = 0) -> TestResult:
    """Two-sided signed-rank test on ``x - y``; zero differences are discarded.

    ``auto`` picks exact enumeration for n <= 25 without ties, seeded
    sign-flip sampling for n <= 25 with ties, and the tie-corrected normal
    approximation (continuity corrected) above that.
    """
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("paired score lists differ in length")
    if x.size < 1:
        raise ValueError("need at least one pair")
    d = x - y
    d = d[d != 0]
    n = len(d)
    if n == 0:
        return TestResult("wilcoxon", 0.0, 1.0, "degenerate", 0, degenerate=True)
    ranks = rank_abs(d)
    w_pos = float(ranks[d > 0].sum())
    total = n * (n + 1) / 2.0
    w = min(w_pos, total - w_pos)
    ties = len(np.unique(np.abs(d))) < n
    if method == "auto":
        if n < exact_below:
            method = "permutation" if ties else "exact"
        else:
            method = "normal"
    if method == "exact":
        if ties:
            raise ValueError("exact branch requires untied |differences|")
        counts = _signed_rank_counts(n)
        wi, ti = int(round(w)), int(round(total))
        if 2 * wi >= ti:
            extreme = 2**n
        else:
            extreme = sum(counts[:wi + 1]) + sum(counts[ti - wi:])
        p = extreme / 2.0**n
    elif method == "permutation":
        rng = np.random.default_rng(seed)
        signs = rng.integers(0, 2, size=(n_resamples, n)).astype(bool)
        sim_pos = (signs * ranks).sum(axis=1)
        sim = np.minimum(sim_pos, total - sim_pos)
        p = float(np.mean(sim <= w + 1e-9))
    elif method == "normal":
        _, tcount = np.unique(np.abs(d), return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24.0 - (tcount**3 - tcount).sum() / 48.0
        dev = max(abs(w - total / 2.0) - 0.5, 0.0)
        p = math.erfc(dev / math.sqrt(2.0 * var)) if var > 0 else 1.0
    else:
        raise ValueError(f"unknown method {method!r}")
    return TestResult("wilcoxon", w, min(1.0, p), method, n)
