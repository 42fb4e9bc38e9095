"""Classification and generation metrics, plus per-speaker breakdowns.

Percent-scale outputs (BLEU, SIF similarity, accuracy and F1 in reports)
are multiplied by 100.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Hashable, Sequence

import numpy as np


# --------------------------------------------------------------------------
# classification


@dataclass
class ClassificationReport:
    accuracy: float
    macro_f1: float
    weighted_f1: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    confusion: np.ndarray  # rows gold, columns predicted

    @property
    def n(self) -> int:
        return int(self.confusion.sum())


def confusion_matrix(preds: Sequence[int], golds: Sequence[int], k: int) -> np.ndarray:
    cm = np.zeros((k, k), dtype=np.int64)
    np.add.at(cm, (np.asarray(golds, dtype=np.int64), np.asarray(preds, dtype=np.int64)), 1)
    return cm


def classification_report(preds: Sequence[int], golds: Sequence[int], k: int) -> ClassificationReport:
    """Accuracy, macro F1 (all ``k`` classes, absent ones count as 0) and support-weighted F1."""
    if len(preds) != len(golds):
        raise ValueError(f"{len(preds)} predictions vs {len(golds)} gold labels")
    if not len(golds):
        raise ValueError("classification_report needs at least one example")
    p, g = np.asarray(preds), np.asarray(golds)
    if min(p.min(), g.min()) < 0 or max(p.max(), g.max()) >= k:
        raise ValueError(f"labels must lie in [0, {k})")
    cm = confusion_matrix(p, g, k)
    tp = np.diag(cm).astype(float)
    pred_tot = cm.sum(axis=0).astype(float)
    support = cm.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(pred_tot > 0, tp / pred_tot, 0.0)
        recall = np.where(support > 0, tp / support, 0.0)
        denom = precision + recall
        f1 = np.where(denom > 0, 2 * precision * recall / denom, 0.0)
    return ClassificationReport(
        accuracy=float(tp.sum() / len(g)),
        macro_f1=float(f1.mean()),
        weighted_f1=float((f1 * support).sum() / support.sum()),
        precision=precision, recall=recall, f1=f1, support=support, confusion=cm,
    )


def top_k_confusion(cm: np.ndarray, k: int = 5) -> tuple[np.ndarray, np.ndarray]:
    """Sub-matrix over the ``k`` most frequent gold classes (ties -> lower id)."""
    support = cm.sum(axis=1)
    order = sorted(range(len(support)), key=lambda i: (-support[i], i))[:k]
    idx = np.array(order, dtype=np.int64)
    return idx, cm[np.ix_(idx, idx)]


# --------------------------------------------------------------------------
# n-gram metrics


def ngrams(tokens: Sequence[Hashable], n: int) -> list[tuple]:
    return [tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)]


def _bleu_stats(hyp, ref, n) -> tuple[int, int]:
    h = Counter(ngrams(hyp, n))
    r = Counter(ngrams(ref, n))
    return sum(min(c, r[g]) for g, c in h.items()), sum(h.values())


def bleu_n(hypotheses: Sequence[Sequence], references: Sequence[Sequence], n: int) -> float:
    """Corpus BLEU at a single order ``n`` (no geometric mean, no smoothing), x100."""
    if len(hypotheses) != len(references):
        raise ValueError("hypotheses and references must pair up")
    if n < 1:
        raise ValueError("n must be >= 1")
    matched = total = hyp_len = ref_len = 0
    for h, r in zip(hypotheses, references):
        m, t = _bleu_stats(h, r, n)
        matched += m
        total += t
        hyp_len += len(h)
        ref_len += len(r)
    if total == 0 or hyp_len == 0:
        return 0.0
    bp = math.exp(min(0.0, 1.0 - ref_len / hyp_len))
    return 100.0 * bp * matched / total


def sentence_bleu_n(hyp: Sequence, ref: Sequence, n: int) -> float:
    return bleu_n([hyp], [ref], n)


def distinct_n(hypotheses: Sequence[Sequence], n: int) -> int:
    """Number of distinct n-gram types pooled over all hypotheses."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return len({g for h in hypotheses for g in ngrams(h, n)})


# --------------------------------------------------------------------------
# SIF embedding similarity


ZERO_REL = 1e-10  # post-removal norm below this fraction of the original counts as zero


@dataclass
class SifModel:
    word_prob: np.ndarray   # p(w) over vocabulary ids
    a: float
    component: np.ndarray   # unit-norm first principal direction

    def weights(self) -> np.ndarray:
        return self.a / (self.a + self.word_prob)

    def embed(self, sentence: Sequence[int], emb: np.ndarray, remove: bool = True) -> np.ndarray:
        if not len(sentence):
            return np.zeros(emb.shape[1])
        ids = np.asarray(sentence, dtype=np.int64)
        v = (self.weights()[ids][:, None] * emb[ids]).sum(axis=0) / len(ids)
        if remove:
            rest = v - (v @ self.component) * self.component
            # a vector lying on the component leaves only roundoff behind
            if np.linalg.norm(rest) <= ZERO_REL * np.linalg.norm(v):
                return np.zeros_like(v)
            v = rest
        return v


def word_probabilities(counts: Sequence[float]) -> np.ndarray:
    c = np.asarray(counts, dtype=float)
    total = c.sum()
    return c / total if total > 0 else c


def first_component(X: np.ndarray) -> np.ndarray:
    """Leading right singular vector of ``X`` (rows not centered).

    Taken from a symmetric eigendecomposition of the small ``d x d`` Gram
    matrix, so close top eigenvalues cost no accuracy.  Sign is fixed so
    the largest-magnitude entry is positive; an all-zero ``X`` yields e0.
    """
    d = X.shape[1]
    G = X.T @ X
    if not G.any():
        out = np.zeros(d)
        out[0] = 1.0
        return out
    _, vecs = np.linalg.eigh(G)
    v = vecs[:, -1]
    return v if v[np.argmax(np.abs(v))] > 0 else -v


def fit_sif(hypotheses: Sequence[Sequence[int]], word_prob: np.ndarray, emb: np.ndarray,
            a: float = 1e-3) -> SifModel:
    model = SifModel(np.asarray(word_prob, dtype=float), a, np.zeros(emb.shape[1]))
    X = np.array([model.embed(h, emb, remove=False) for h in hypotheses]).reshape(-1, emb.shape[1])
    model.component = first_component(X)
    return model


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(u @ v / (nu * nv))


def sif_similarity(hypotheses, references, model: SifModel, emb: np.ndarray) -> tuple[list[float], float]:
    """Per-pair cosine (x100) of SIF sentence vectors, and their mean."""
    scores = [100.0 * cosine(model.embed(h, emb), model.embed(r, emb))
              for h, r in zip(hypotheses, references)]
    return scores, (float(np.mean(scores)) if scores else 0.0)


# --------------------------------------------------------------------------
# reports


@dataclass
class GenerationReport:
    bleu1: float
    bleu2: float
    sif: float
    distinct1: int
    distinct2: int
    pair_scores: dict[str, list[float]] = field(default_factory=dict)


def generation_report(hypotheses, references, sif_model: SifModel | None = None,
                      emb: np.ndarray | None = None) -> GenerationReport:
    pair = {
        "bleu1": [sentence_bleu_n(h, r, 1) for h, r in zip(hypotheses, references)],
        "bleu2": [sentence_bleu_n(h, r, 2) for h, r in zip(hypotheses, references)],
        "distinct1": [float(distinct_n([h], 1)) for h in hypotheses],
        "distinct2": [float(distinct_n([h], 2)) for h in hypotheses],
    }
    sif = 0.0
    if sif_model is not None and emb is not None:
        pair["sif"], sif = sif_similarity(hypotheses, references, sif_model, emb)
    return GenerationReport(
        bleu1=bleu_n(hypotheses, references, 1),
        bleu2=bleu_n(hypotheses, references, 2),
        sif=sif,
        distinct1=distinct_n(hypotheses, 1),
        distinct2=distinct_n(hypotheses, 2),
        pair_scores=pair,
    )


@dataclass
class SpeakerBreakdown:
    a: float | None
    b: float | None
    n_a: int
    n_b: int

    @property
    def delta(self) -> float | None:
        if self.a is None or self.b is None:
            return None
        return abs(self.a - self.b)


def speaker_breakdown(items: Sequence, speakers: Sequence[str],
                      metric: Callable[[list], float]) -> SpeakerBreakdown:
    """Apply ``metric`` separately to the items whose current speaker is A and B."""
    if len(items) != len(speakers):
        raise ValueError("items and speakers must be parallel")
    part = {"A": [], "B": []}
    for it, s in zip(items, speakers):
        part[s].append(it)
    val = {s: (metric(v) if v else None) for s, v in part.items()}
    return SpeakerBreakdown(val["A"], val["B"], len(part["A"]), len(part["B"]))


def percent_correct(flags: Sequence[bool]) -> float:
    return 100.0 * float(np.mean(flags))
