"""Acceptance suite: one test per criterion, each reporting PASS/FAIL with a detail line.

Run alone with ``pytest tests/test_acceptance.py -v``; the terminal summary
lists every criterion.  The synthetic training criteria (4-6) take several
minutes each.
"""
import time

import numpy as np
import pytest

from relspeaker import numerics as nx
from relspeaker import training as T
from relspeaker.corpus import (GEN, MARKED, RECOG, Example, SynthConfig, Utterance,
                               collate, gen_synthetic, make_examples)
from relspeaker.encoders import ALL_MODES, HierarchicalEncoder
from relspeaker.experiments import DESK_DIMS, prepare, run_cell
from relspeaker.models import ModelConfig, build_model

from .conftest import random_session, swap_speakers
from .test_cli import train_twice
from .test_metrics import check_metric_oracles
from .test_stats import check_stats_oracles

REL = ("rel-emb", "rel-enc")
ABS = ("abs-emb", "abs-enc")


def detail(record_property, text):
    record_property("detail", text)


def elapsed(t0):
    return time.perf_counter() - t0


# ---------------------------------------------------------------- 1


@pytest.mark.criterion(1, "gradient check on every parameter, both tasks, all modes")
def test_c1_gradients(record_property):
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    sessions = [random_session(rng, 4, vocab=20, sid=f"s{k}") for k in range(2)]
    worst, where = 0.0, ""
    for task in (RECOG, GEN):
        ex = make_examples(sessions, task, 3)[-3:]
        batch = collate(ex)
        for mode in ALL_MODES:
            cfg = ModelConfig(task=task, mode=mode, vocab_size=20, n_labels=2, word_dim=4,
                              hidden=8, dial_hidden=8, spk_dim=3, dec_hidden=8)
            model = build_model(cfg, seed=3)
            errs = nx.check_gradients(lambda: model.loss(batch), model.parameters())
            name = max(errs, key=errs.get)
            if errs[name] > worst:
                worst, where = errs[name], f"{task}/{mode}/{name}"
    t = elapsed(t0)
    detail(record_property, f"max rel err {worst:.2e} at {where}; {t:.0f}s")
    assert worst < 1e-4
    assert t < 120


# ---------------------------------------------------------------- 2


def dialog_vector(enc, session, task=RECOG):
    ex = make_examples([session], task, 10)[-1]
    return enc(collate([ex])).data


@pytest.mark.criterion(2, "relative modes invariant to A/B relabeling, absolute modes not")
def test_c2_swap_invariance(record_property):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    sessions = [random_session(rng, int(rng.integers(2, 9)), sid=f"s{k}") for k in range(50)]
    counts = {}
    for mode in REL + ABS:
        differs = 0
        for k, s in enumerate(sessions):
            enc = HierarchicalEncoder(ModelConfig(task=RECOG, mode=mode, vocab_size=20, word_dim=6,
                                                  hidden=8, dial_hidden=8, spk_dim=4
                                                  ).encoder_config(),
                                      np.random.default_rng(100 + k))
            a, b = dialog_vector(enc, s), dialog_vector(enc, swap_speakers(s))
            if mode in REL:
                assert np.array_equal(a, b), (mode, k)
            differs += np.max(np.abs(a - b)) > 1e-9
        counts[mode] = differs
    t = elapsed(t0)
    detail(record_property, "differing sessions " + ", ".join(f"{m}={c}/50" for m, c in counts.items())
           + f"; {t:.0f}s")
    assert all(counts[m] == 0 for m in REL)
    assert all(counts[m] >= 49 for m in ABS)
    assert t < 60


# ---------------------------------------------------------------- 3


@pytest.mark.criterion(3, "current-speaker change flips relative slots only")
def test_c3_current_speaker(record_property):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    checked = 0
    for k in range(20):
        s = random_session(rng, 5, sid=f"s{k}")
        ctx = s.utterances
        as_a = collate([Example(ctx, GEN, Utterance("A", (5,)), "A")])
        as_b = collate([Example(ctx, GEN, Utterance("B", (5,)), "B")])
        for mode in ALL_MODES:
            enc = HierarchicalEncoder(ModelConfig(task=GEN, mode=mode, vocab_size=20, word_dim=6,
                                                  hidden=8, dial_hidden=8, spk_dim=4
                                                  ).encoder_config(),
                                      np.random.default_rng(k))
            za, zb = enc(as_a).data, enc(as_b).data
            if mode in REL:
                assert np.array_equal(enc.speaker_index(as_a), 1 - enc.speaker_index(as_b))
                assert np.max(np.abs(za - zb)) > 1e-9, (mode, k)
            else:
                assert np.array_equal(enc.speaker_index(as_a), enc.speaker_index(as_b))
                assert np.array_equal(za, zb), (mode, k)
            checked += 1
    t = elapsed(t0)
    detail(record_property, f"{checked} (session, mode) pairs; {t:.0f}s")
    assert t < 60


# ---------------------------------------------------------------- 4-6


def train_cfg(epochs):
    return T.TrainConfig(max_epochs=epochs, batch_size=30, lr_init=1e-3)


@pytest.mark.slow
@pytest.mark.criterion(4, "synthetic relation task: rel-enc >= 97%, none <= 55%")
def test_c4_relation_task(record_property):
    t0 = time.perf_counter()
    ds = prepare(gen_synthetic(SynthConfig(marked=False, rho=0.5, eps=0.0)), RECOG, context=5)
    acc = {mode: np.mean([run_cell(ds, mode, seed, train_cfg(2), DESK_DIMS).test.report.accuracy
                          for seed in range(3)]) * 100
           for mode in ("none", "rel-enc")}
    t = elapsed(t0)
    detail(record_property, f"rel-enc {acc['rel-enc']:.2f}, none {acc['none']:.2f}; {t:.0f}s")
    assert acc["rel-enc"] >= 97.0
    assert acc["none"] <= 55.0
    assert t < 15 * 60


@pytest.mark.slow
@pytest.mark.criterion(5, "bias skew: absolute drop >= 5 points, relative drop <= 2")
def test_c5_bias_skew(record_property):
    t0 = time.perf_counter()
    ds = prepare(gen_synthetic(SynthConfig(marked=True, marker=False, rho=0.9)), RECOG, context=5)
    marked = ds.labels.index(MARKED)
    drop, delta = {}, {}
    for mode in ABS + REL:
        cells = [run_cell(ds, mode, seed, train_cfg(3), DESK_DIMS, eval_train=True)
                 for seed in range(3)]
        drop[mode] = np.mean([c.train.report.accuracy - c.test.report.accuracy
                              for c in cells]) * 100
        delta[mode] = np.mean([c.test.per_class_speaker[marked].delta for c in cells])
    t = elapsed(t0)
    detail(record_property, "drop " + ", ".join(f"{m}={v:.2f}" for m, v in drop.items())
           + "; MARKED delta " + ", ".join(f"{m}={v:.1f}" for m, v in delta.items())
           + f"; {t:.0f}s")
    assert all(drop[m] >= 5.0 for m in ABS)
    assert all(drop[m] <= 2.0 for m in REL)
    assert max(delta[m] for m in REL) <= min(delta[m] for m in ABS)
    assert t < 20 * 60


@pytest.mark.slow
@pytest.mark.criterion(6, "relation-keyed generation: rel-enc BLEU-1 >= 90 and >= none + 20")
def test_c6_keyed_generation(record_property):
    t0 = time.perf_counter()
    cfg = SynthConfig(n_train=1000, n_dev=100, n_test=100, utterances=10, keyed=True)
    ds = prepare(gen_synthetic(cfg), GEN, context=4)
    bleu = {mode: np.mean([run_cell(ds, mode, seed, train_cfg(2), DESK_DIMS).test.report.bleu1
                           for seed in range(3)])
            for mode in ("none", "rel-enc")}
    t = elapsed(t0)
    detail(record_property, f"BLEU-1 rel-enc {bleu['rel-enc']:.2f}, none {bleu['none']:.2f}; {t:.0f}s")
    assert bleu["rel-enc"] >= 90.0
    assert bleu["rel-enc"] >= bleu["none"] + 20.0
    assert t < 20 * 60


# ---------------------------------------------------------------- 7-10


@pytest.mark.criterion(7, "metrics match brute-force oracles on 200 instances")
def test_c7_metric_oracles(record_property):
    t0 = time.perf_counter()
    n = check_metric_oracles(seed=7, count=200)
    t = elapsed(t0)
    detail(record_property, f"{n} instances; {t:.1f}s")
    assert n == 200 and t < 60


@pytest.mark.criterion(8, "significance tests match enumeration oracles")
def test_c8_stats_oracles(record_property):
    t0 = time.perf_counter()
    n = check_stats_oracles(seed=8)
    from relspeaker import stats as S
    gaps = []
    for m in range(20, 31):
        for a in range(m + 1):
            # near the exact/asymptotic threshold, only the informative range
            e = S.mcnemar(a, m - a, method="exact").p_value
            if 0.001 <= e <= 0.5:
                gaps.append(abs(e - S.mcnemar(a, m - a, method="chi2").p_value))
    rng = np.random.default_rng(8)
    for _ in range(50):
        d = rng.normal(0.4, 1.0, size=25)
        e = S.wilcoxon_signed_rank(d, np.zeros(25), method="exact").p_value
        gaps.append(abs(e - S.wilcoxon_signed_rank(d, np.zeros(25), method="normal").p_value))
    t = elapsed(t0)
    detail(record_property, f"{n} exact cases; max asymptotic gap {max(gaps):.4f}; {t:.1f}s")
    assert max(gaps) < 0.01 and t < 60


@pytest.mark.criterion(9, "constant dev loss halves the rate 14 times then stops")
def test_c9_schedule(record_property, monkeypatch):
    monkeypatch.setattr(T, "evaluate_loss", lambda model, examples, batch_size=200: 1.0)
    s = random_session(np.random.default_rng(9), 4)
    ex = make_examples([s], RECOG, 3)
    mc = ModelConfig(task=RECOG, mode="none", vocab_size=20, n_labels=2, word_dim=4, hidden=4,
                     dial_hidden=4, spk_dim=2)
    res = T.train(T.TrainConfig(mc, max_epochs=100, lr_init=1e-3, lr_floor=1e-7), ex, ex)
    lrs = [e.lr for e in res.history.epochs]
    halvings = sum(1 for a, b in zip(lrs, lrs[1:]) if b == a / 2) + 1  # the last one ends training
    detail(record_property, f"{len(lrs)} epochs, {halvings} halvings, stop '{res.history.stop_reason}'")
    assert len(lrs) == 15 and halvings == 14
    assert lrs[:2] == [1e-3, 1e-3] and lrs[-1] == 1e-3 / 2**13
    assert [e.improved for e in res.history.epochs] == [True] + [False] * 14


@pytest.mark.criterion(10, "train twice with the same flags gives identical bytes")
def test_c10_determinism(record_property, tmp_path, capsys):
    t0 = time.perf_counter()
    (a, _), (b, _) = train_twice(tmp_path, capsys, task=GEN, mode="rel-enc",
                                 extra=["--epochs", "5"])
    same = {name: (a / name).read_bytes() == (b / name).read_bytes()
            for name in ("model.ckpt", "history.txt")}
    t = elapsed(t0)
    detail(record_property, ", ".join(f"{k} {'identical' if v else 'DIFFERS'}" for k, v in same.items())
           + f"; {t:.0f}s")
    assert all(same.values()) and t < 300
