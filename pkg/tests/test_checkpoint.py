import numpy as np
import pytest

from relspeaker import checkpoint as C
from relspeaker.corpus import GEN, RECOG, Vocabulary
from relspeaker.models import ModelConfig, build_model

TINY = dict(vocab_size=12, word_dim=4, hidden=5, dial_hidden=5, spk_dim=3, dec_hidden=6)


def make(task=GEN, mode="rel-enc", seed=2):
    model = build_model(ModelConfig(task=task, mode=mode, n_labels=3, **TINY), seed=seed)
    vocab = Vocabulary(["<pad>", "<unk>", "<bos>", "<eos>"] + [f"w{i}" for i in range(8)],
                       [0, 0, 0, 0] + list(range(8, 0, -1)))
    return model, vocab


@pytest.mark.parametrize("task,mode", [(GEN, "rel-enc"), (RECOG, "abs-emb"), (RECOG, "none")])
def test_round_trip_is_bit_exact(tmp_path, task, mode):
    model, vocab = make(task, mode)
    C.save(tmp_path / "m.ckpt", model, vocab, ["x", "y", "z"], {"epochs": 3})
    ck = C.load(tmp_path / "m.ckpt")
    assert ck.config == model.cfg and ck.vocab == vocab
    assert ck.labels == ["x", "y", "z"] and ck.extra == {"epochs": 3}
    rebuilt = ck.build()
    for k, p in model.parameters().items():
        assert np.array_equal(p.data, rebuilt.parameters()[k].data), k


def test_same_model_same_bytes(tmp_path):
    a = C.save(tmp_path / "a", *make(), ["l"])
    b = C.save(tmp_path / "b", *make(), ["l"])
    assert a == b
    assert a != C.save(tmp_path / "c", *make(seed=3), ["l"])


def test_corrupt_files_rejected():
    data = C.dumps(C.Checkpoint(make()[0].cfg, make()[0].state(), make()[1], ["l"]))
    with pytest.raises(C.CheckpointError, match="magic"):
        C.loads(b"XXXXXXXX" + data[8:])
    for cut in (10, 30, len(data) - 8):
        with pytest.raises(C.CheckpointError):
            C.loads(data[:cut])
    with pytest.raises(C.CheckpointError, match="trailing"):
        C.loads(data + b"\0" * 8)
