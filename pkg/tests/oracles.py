"""Brute-force reference implementations, written without the package's helpers."""
from __future__ import annotations

import itertools
import math

import numpy as np


def confusion(preds, golds, k):
    cm = [[0] * k for _ in range(k)]
    for p, g in zip(preds, golds):
        cm[g][p] += 1
    return cm


def f1_scores(preds, golds, k):
    """(accuracy, macro F1, weighted F1, per-class F1) by explicit counting."""
    per = []
    for c in range(k):
        tp = sum(1 for p, g in zip(preds, golds) if p == c and g == c)
        fp = sum(1 for p, g in zip(preds, golds) if p == c and g != c)
        fn = sum(1 for p, g in zip(preds, golds) if p != c and g == c)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        per.append(2 * prec * rec / (prec + rec) if prec + rec else 0.0)
    support = [sum(1 for g in golds if g == c) for c in range(k)]
    acc = sum(1 for p, g in zip(preds, golds) if p == g) / len(golds)
    macro = sum(per) / k
    weighted = sum(f * s for f, s in zip(per, support)) / sum(support)
    return acc, macro, weighted, per


def grams(seq, n):
    out = []
    for i in range(len(seq)):
        if i + n <= len(seq):
            out.append(tuple(seq[i + j] for j in range(n)))
    return out


def bleu(hyps, refs, n):
    matched = total = hl = rl = 0
    for h, r in zip(hyps, refs):
        hg, rg = grams(h, n), grams(r, n)
        for g in set(hg):
            matched += min(hg.count(g), rg.count(g))
        total += len(hg)
        hl += len(h)
        rl += len(r)
    if total == 0 or hl == 0:
        return 0.0
    bp = 1.0 if hl >= rl else math.exp(1 - rl / hl)
    return 100.0 * bp * matched / total


def distinct(hyps, n):
    seen = []
    for h in hyps:
        for g in grams(h, n):
            if g not in seen:
                seen.append(g)
    return len(seen)


def sif(hyps, refs, prob, emb, a):
    """Per-pair SIF cosine x100; principal direction from an explicit eigendecomposition."""
    def raw(sent):
        v = np.zeros(emb.shape[1])
        for w in sent:
            v = v + (a / (a + prob[w])) * emb[w]
        return v / len(sent) if sent else v

    X = np.array([raw(h) for h in hyps])
    if not X.any():
        # no direction at all; same convention as the package (first basis vector)
        u = np.eye(emb.shape[1])[0]
    else:
        u = np.linalg.svd(X)[2][0]

    def final(sent):
        v = raw(sent)
        rest = v - (v @ u) * u
        # shared convention: roundoff-sized remainders are exact zeros
        return np.zeros_like(v) if math.sqrt(rest @ rest) <= 1e-10 * math.sqrt(v @ v) else rest

    scores = []
    for h, r in zip(hyps, refs):
        x, y = final(h), final(r)
        nx_, ny = math.sqrt(x @ x), math.sqrt(y @ y)
        scores.append(0.0 if nx_ == 0 or ny == 0 else 100.0 * (x @ y) / (nx_ * ny))
    return scores


def mcnemar_exact(n01, n10):
    n = n01 + n10
    if n == 0:
        return 1.0
    # probability of every outcome at least as unlikely as the observed one
    probs = [math.comb(n, k) / 2**n for k in range(n + 1)]
    obs = probs[n01]
    return min(1.0, sum(p for p in probs if p <= obs * (1 + 1e-12)))


def wilcoxon_exact(d):
    d = [x for x in d if x != 0]
    n = len(d)
    if n == 0:
        return 1.0
    order = sorted(range(n), key=lambda i: abs(d[i]))
    rank = [0] * n
    for r, i in enumerate(order, start=1):
        rank[i] = r
    total = n * (n + 1) / 2

    def stat(signs):
        pos = sum(rank[i] for i in range(n) if signs[i] > 0)
        return min(pos, total - pos)

    w = stat([1 if x > 0 else -1 for x in d])
    hits = sum(1 for signs in itertools.product((1, -1), repeat=n) if stat(signs) <= w)
    return hits / 2**n
