import numpy as np
import pytest

from relspeaker import experiments as E
from relspeaker.corpus import GEN, RECOG, SynthConfig, gen_synthetic
from relspeaker.encoders import ALL_MODES
from relspeaker.training import TrainConfig

SMALL = SynthConfig(n_train=12, n_dev=4, n_test=4, utterances=6, vocab_size=10, seed=3)
DIMS = dict(word_dim=6, hidden=6, dial_hidden=6, spk_dim=3, dec_hidden=6)
FAST = TrainConfig(max_epochs=1, batch_size=8)


@pytest.fixture(scope="module")
def splits():
    return gen_synthetic(SMALL)


def test_prepare_labels_and_vocab(splits):
    ds = E.prepare(splits, RECOG)
    assert ds.context == 5 and set(ds.examples) == {"train", "dev", "test"}
    assert set(ds.labels) <= {"SAME", "DIFF", "MARKED", "OTHER"} and len(ds.labels) >= 3
    assert E.prepare(splits, GEN).context == 4


@pytest.mark.parametrize("task", [RECOG, GEN])
def test_report_round_trip(splits, task):
    ds = E.prepare(splits, task)
    cell = E.run_cell(ds, "rel-emb", 0, FAST, DIMS)
    text = E.format_report(cell.test, ds.labels, {"mode": "rel-emb", "seed": 0})
    rep = E.parse_report(text)
    assert rep["run"]["mode"] == "rel-emb"
    assert int(rep["run"]["n_examples"]) == len(ds.examples["test"])
    for k, v in E.headline(cell.test).items():
        assert float(rep["metrics"][k]) == pytest.approx(v, abs=1e-4)
    if task == RECOG:
        assert {"per_class", "confusion", "confusion_top5"} <= set(rep)
        for k in ("accuracy.A", "accuracy.B", "accuracy.delta", "accuracy.n_A", "accuracy.n_B"):
            assert k in rep["per_speaker"]
        rows = [v for k, v in rep["confusion"].items() if k != "labels"]
        assert sum(int(x) for r in rows for x in r.split()) == len(ds.examples["test"])
    else:
        for m in ("bleu1", "bleu2", "sif", "distinct1", "distinct2"):
            assert f"{m}.delta" in rep["per_speaker"]
        assert "confusion" not in rep


def test_compare_layout_and_tests(splits):
    ds = E.prepare(splits, RECOG)
    comp = E.compare(ds, ["rel-enc", "none", "abs-emb"], [1, 0], FAST, DIMS)
    assert [(c.mode, c.seed) for c in comp.cells] == [
        (m, s) for m in ("none", "abs-emb", "rel-enc") for s in (0, 1)]
    assert set(comp.tests) == {(m, s, "accuracy") for m in ("abs-emb", "rel-enc") for s in (0, 1)}
    lines = comp.to_text().splitlines()
    assert [l for l in lines if l.startswith("[")] == ["[table]", "[mean]", "[significance]"]
    assert sum(1 for l in lines if l.startswith(("none ", "abs-emb ", "rel-enc "))) == 6 + 3 + 4
    means = comp.means()
    acc = [E.headline(c.test)["accuracy"] for c in comp.cells if c.mode == "none"]
    assert means["none"]["accuracy"] == pytest.approx(np.mean(acc))


def test_generation_compare_uses_paired_metrics(splits):
    ds = E.prepare(splits, GEN)
    comp = E.compare(ds, ["none", "rel-enc"], [0], FAST, DIMS)
    assert {k[2] for k in comp.tests} == set(E.PAIRED_METRICS)
    single = E.compare(ds, ["none"], [0], FAST, DIMS)
    assert single.tests == {} and "[significance]" not in single.to_text()


def test_mode_order_follows_canonical_list():
    assert list(ALL_MODES) == ["none", "abs-emb", "abs-enc", "rel-emb", "rel-enc"]
