"""Dataset preparation, evaluation and the mode-by-seed comparison grid."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from . import metrics as M
from .corpus import (RECOG, RESERVED, Example, Session, Vocabulary, batchify,
                     build_vocab, collect_labels, encode_sessions, make_examples)
from .encoders import ALL_MODES
from .models import DialogActRecognizer, DialogModel, ModelConfig, ResponseGenerator
from .stats import TestResult, mcnemar_from_correct, wilcoxon_signed_rank
from .training import TrainConfig, TrainResult, train

# small dimensions used for synthetic runs on a laptop CPU
DESK_DIMS = dict(word_dim=16, hidden=16, dial_hidden=16, spk_dim=8, dec_hidden=16)


@dataclass
class Dataset:
    task: str
    vocab: Vocabulary
    labels: list[str]
    context: int
    examples: dict[str, list[Example]]


def prepare(splits: dict[str, list[Session]], task: str, k_vocab: int = 10000,
            context: int | None = None, vocab: Vocabulary | None = None,
            labels: Sequence[str] | None = None) -> Dataset:
    """Vocabulary from the train split, labels from all splits in first-appearance order."""
    if context is None:
        context = 5 if task == RECOG else 4
    if vocab is None:
        vocab = build_vocab(splits["train"], k_vocab)
    if labels is None:
        labels = collect_labels(itertools.chain.from_iterable(splits.values()))
    examples = {name: make_examples(encode_sessions(s, vocab, labels), task, context)
                for name, s in splits.items()}
    return Dataset(task, vocab, list(labels), context, examples)


def model_config(ds: Dataset, mode: str, **dims) -> ModelConfig:
    return ModelConfig(task=ds.task, mode=mode, vocab_size=len(ds.vocab),
                       n_labels=max(len(ds.labels), 2), context=ds.context, **dims)


# --------------------------------------------------------------------------
# evaluation


@dataclass
class RecognitionEval:
    report: M.ClassificationReport
    preds: np.ndarray
    golds: np.ndarray
    speakers: list[str]
    per_speaker: M.SpeakerBreakdown
    per_class_speaker: dict[int, M.SpeakerBreakdown]

    @property
    def correct(self) -> np.ndarray:
        return self.preds == self.golds


@dataclass
class GenerationEval:
    report: M.GenerationReport
    hypotheses: list[list[int]]
    references: list[list[int]]
    speakers: list[str]
    per_speaker: dict[str, M.SpeakerBreakdown]


def evaluate_recognition(model: DialogActRecognizer, examples: Sequence[Example],
                         n_labels: int, top_k: int = 5) -> RecognitionEval:
    preds, golds, speakers = [], [], []
    for batch in batchify(examples, 200):
        preds.append(model.predict(batch))
        golds.append(batch.labels)
        speakers += [ex.current_speaker for ex in batch.examples]
    p, g = np.concatenate(preds), np.concatenate(golds)
    report = M.classification_report(p, g, n_labels)
    correct = list(p == g)
    per_class = {}
    top, _ = M.top_k_confusion(report.confusion, top_k)
    for c in top:
        if report.support[c] == 0:
            continue
        sel = [i for i in range(len(g)) if g[i] == c]
        per_class[int(c)] = M.speaker_breakdown([correct[i] for i in sel],
                                                [speakers[i] for i in sel], M.percent_correct)
    return RecognitionEval(report, p, g, speakers,
                           M.speaker_breakdown(correct, speakers, M.percent_correct), per_class)


def word_probabilities(vocab: Vocabulary) -> np.ndarray:
    counts = np.zeros(len(vocab))
    for tok, i in vocab.index.items():
        if tok not in RESERVED:
            counts[i] = vocab.counts.get(tok, 0)
    return M.word_probabilities(counts)


def evaluate_generation(model: ResponseGenerator, examples: Sequence[Example], vocab: Vocabulary,
                        sif_a: float = 1e-3, embeddings: np.ndarray | None = None,
                        max_len: int | None = None) -> GenerationEval:
    hyps, refs, speakers = [], [], []
    for batch in batchify(examples, 200):
        hyps += model.generate(batch, max_len)
        refs += [list(ex.target.tokens) for ex in batch.examples]
        speakers += [ex.current_speaker for ex in batch.examples]
    emb = model.encoder.word_emb.data if embeddings is None else embeddings
    sif = M.fit_sif(hyps, word_probabilities(vocab), emb, sif_a)
    report = M.generation_report(hyps, refs, sif, emb)
    pairs = list(zip(hyps, refs))
    per = {
        "bleu1": M.speaker_breakdown(pairs, speakers, lambda ps: M.bleu_n(*zip(*ps), 1)),
        "bleu2": M.speaker_breakdown(pairs, speakers, lambda ps: M.bleu_n(*zip(*ps), 2)),
        "sif": M.speaker_breakdown(report.pair_scores["sif"], speakers,
                                   lambda s: float(np.mean(s))),
        "distinct1": M.speaker_breakdown(hyps, speakers, lambda hs: M.distinct_n(hs, 1)),
        "distinct2": M.speaker_breakdown(hyps, speakers, lambda hs: M.distinct_n(hs, 2)),
    }
    return GenerationEval(report, hyps, refs, speakers, per)


def evaluate(model: DialogModel, ds: Dataset, split: str, **kw):
    if ds.task == RECOG:
        return evaluate_recognition(model, ds.examples[split], model.cfg.n_labels)
    return evaluate_generation(model, ds.examples[split], ds.vocab, **kw)


def headline(ev) -> dict[str, float]:
    if isinstance(ev, RecognitionEval):
        r = ev.report
        return {"accuracy": 100 * r.accuracy, "macro_f1": 100 * r.macro_f1,
                "weighted_f1": 100 * r.weighted_f1}
    r = ev.report
    return {"bleu1": r.bleu1, "bleu2": r.bleu2, "sif": r.sif,
            "distinct1": float(r.distinct1), "distinct2": float(r.distinct2)}


# --------------------------------------------------------------------------
# report text


def _fmt(v) -> str:
    if v is None:
        return "absent"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.4f}"


def format_report(ev, labels: Sequence[str] = (), meta: dict | None = None) -> str:
    """Structured ``key: value`` text; key names are stable."""
    out = ["[run]"]
    for k, v in (meta or {}).items():
        out.append(f"{k}: {v}")
    out.append(f"n_examples: {len(ev.speakers)}")
    out.append("")
    out.append("[metrics]")
    for k, v in headline(ev).items():
        out.append(f"{k}: {_fmt(int(v) if k.startswith('distinct') else v)}")
    out.append("")
    out.append("[per_speaker]")
    if isinstance(ev, RecognitionEval):
        groups = {"accuracy": ev.per_speaker}
        for c, bd in ev.per_class_speaker.items():
            groups[f"accuracy.class.{labels[c] if c < len(labels) else c}"] = bd
    else:
        groups = dict(ev.per_speaker)
    for name, bd in groups.items():
        out.append(f"{name}.A: {_fmt(bd.a)}")
        out.append(f"{name}.B: {_fmt(bd.b)}")
        out.append(f"{name}.delta: {_fmt(bd.delta)}")
        out.append(f"{name}.n_A: {bd.n_a}")
        out.append(f"{name}.n_B: {bd.n_b}")
    if isinstance(ev, RecognitionEval):
        r = ev.report
        names = [labels[i] if i < len(labels) else str(i) for i in range(len(r.support))]
        out.append("")
        out.append("[per_class]")
        out.append("# label precision recall f1 support")
        for i, name in enumerate(names):
            out.append(f"{name}: {r.precision[i]:.4f} {r.recall[i]:.4f} {r.f1[i]:.4f} {r.support[i]}")
        out.append("")
        out.append("[confusion]")
        out.append("# rows gold, columns predicted")
        out.append("labels: " + " ".join(names))
        for i, name in enumerate(names):
            out.append(f"{name}: " + " ".join(str(int(x)) for x in r.confusion[i]))
        idx, sub = M.top_k_confusion(r.confusion, 5)
        out.append("")
        out.append("[confusion_top5]")
        out.append("labels: " + " ".join(names[i] for i in idx))
        for i, row in zip(idx, sub):
            out.append(f"{names[i]}: " + " ".join(str(int(x)) for x in row))
    return "\n".join(out) + "\n"


def parse_report(text: str) -> dict[str, dict[str, str]]:
    sections: dict[str, dict[str, str]] = {}
    cur = None
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            cur = sections.setdefault(line[1:-1], {})
            continue
        key, _, value = line.partition(":")
        cur[key.strip()] = value.strip()
    return sections


# --------------------------------------------------------------------------
# comparison grid


@dataclass
class CellResult:
    mode: str
    seed: int
    result: TrainResult
    test: object
    train: object | None = None


def run_cell(ds: Dataset, mode: str, seed: int, train_cfg: TrainConfig | None = None,
             dims: dict | None = None, eval_train: bool = False) -> CellResult:
    cfg = train_cfg or TrainConfig()
    mcfg = model_config(ds, mode, **(dims or {}))
    cfg = replace(cfg, model=mcfg, seed=seed)
    res = train(cfg, ds.examples["train"], ds.examples["dev"])
    test_eval = evaluate(res.model, ds, "test")
    train_eval = evaluate(res.model, ds, "train") if eval_train else None
    return CellResult(mode, seed, res, test_eval, train_eval)


@dataclass
class Comparison:
    task: str
    cells: list[CellResult]
    tests: dict[tuple[str, int, str], TestResult] = field(default_factory=dict)

    def means(self) -> dict[str, dict[str, float]]:
        out = {}
        for mode in dict.fromkeys(c.mode for c in self.cells):
            rows = [headline(c.test) for c in self.cells if c.mode == mode]
            out[mode] = {k: float(np.mean([r[k] for r in rows])) for k in rows[0]}
        return out

    def to_text(self) -> str:
        keys = list(headline(self.cells[0].test))
        lines = ["[table]", "# mode seed " + " ".join(keys)]
        for c in self.cells:
            h = headline(c.test)
            lines.append(f"{c.mode} {c.seed} " + " ".join(f"{h[k]:.4f}" for k in keys))
        lines += ["", "[mean]", "# mode " + " ".join(keys)]
        for mode, h in self.means().items():
            lines.append(f"{mode} " + " ".join(f"{h[k]:.4f}" for k in keys))
        if self.tests:
            lines += ["", "[significance]", "# mode seed metric test statistic p branch"]
            for (mode, seed, metric), t in sorted(self.tests.items()):
                lines.append(f"{mode} {seed} {metric} {t.name} {t.statistic:.4f} "
                             f"{t.p_value:.6g} {t.branch}")
        return "\n".join(lines) + "\n"


# per-pair scores that make sense as paired samples
PAIRED_METRICS = ("bleu1", "bleu2", "sif")


def significance_vs_baseline(cells: Sequence[CellResult], task: str,
                             baseline: str = "none") -> dict[tuple[str, int, str], TestResult]:
    base = {c.seed: c for c in cells if c.mode == baseline}
    tests = {}
    for c in cells:
        if c.mode == baseline or c.seed not in base:
            continue
        b = base[c.seed].test
        if task == RECOG:
            tests[(c.mode, c.seed, "accuracy")] = mcnemar_from_correct(b.correct, c.test.correct)
        else:
            for metric in PAIRED_METRICS:
                tests[(c.mode, c.seed, metric)] = wilcoxon_signed_rank(
                    c.test.report.pair_scores[metric], b.report.pair_scores[metric])
    return tests


def compare(ds: Dataset, modes: Iterable[str] = ALL_MODES, seeds: Iterable[int] = (0, 1, 2),
            train_cfg: TrainConfig | None = None, dims: dict | None = None) -> Comparison:
    modes = sorted(set(modes), key=list(ALL_MODES).index)
    seeds = sorted(set(seeds))
    cells = [run_cell(ds, m, s, train_cfg, dims) for m in modes for s in seeds]
    tests = significance_vs_baseline(cells, ds.task) if len(modes) > 1 else {}
    return Comparison(ds.task, cells, tests)
