"""Task heads over the dialog vector: DA classification and response generation."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import numerics as nx
from .corpus import BOS, EOS, GEN, RECOG, Batch
from .encoders import EncoderConfig, GruLayer, HierarchicalEncoder
from .numerics import Tensor


@dataclass(frozen=True)
class ModelConfig:
    """Model dimensions plus the choices the architecture leaves open."""
    task: str = RECOG
    mode: str = "none"
    vocab_size: int = 10004
    n_labels: int = 42
    word_dim: int = 200
    hidden: int = 300
    dial_hidden: int = 300
    spk_dim: int = 30
    dec_hidden: int = 300
    context: int | None = None  # None -> 5 for recognition, 4 for generation
    max_len: int = 30

    @property
    def window(self) -> int:
        if self.context is not None:
            return self.context
        return 5 if self.task == RECOG else 4

    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(self.vocab_size, self.word_dim, self.hidden, self.dial_hidden,
                             self.spk_dim, self.mode)

    def to_dict(self) -> dict:
        return asdict(self)


def _param(rng, shape, bound, name):
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True, name=name)


class DialogModel:
    """Shared plumbing: encoder construction and named parameters."""

    def __init__(self, cfg: ModelConfig, seed: int = 0, word_vectors: np.ndarray | None = None):
        self.cfg = cfg
        self.rng = np.random.default_rng(seed)
        self.encoder = HierarchicalEncoder(cfg.encoder_config(), self.rng, word_vectors)

    def parameters(self) -> dict[str, Tensor]:
        return self.encoder.parameters()

    def dialog_vectors(self, batch: Batch) -> Tensor:
        return self.encoder(batch)

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        params = self.parameters()
        if set(state) != set(params):
            missing = sorted(set(params) - set(state))
            extra = sorted(set(state) - set(params))
            raise ValueError(f"state mismatch: missing {missing}, unexpected {extra}")
        for k, p in params.items():
            if state[k].shape != p.shape:
                raise ValueError(f"{k}: shape {state[k].shape} != {p.shape}")
            p.data = np.array(state[k], dtype=float)

    def state(self) -> dict[str, np.ndarray]:
        return {k: p.data.copy() for k, p in self.parameters().items()}


class DialogActRecognizer(DialogModel):
    """Fully-connected softmax layer over the dialog vector."""

    def __init__(self, cfg: ModelConfig, seed: int = 0, word_vectors=None):
        super().__init__(cfg, seed, word_vectors)
        bound = 1.0 / np.sqrt(cfg.dial_hidden)
        self.W = _param(self.rng, (cfg.dial_hidden, cfg.n_labels), bound, "head.W")
        self.b = _param(self.rng, (cfg.n_labels,), bound, "head.b")

    def parameters(self):
        return {**super().parameters(), "head.W": self.W, "head.b": self.b}

    def logits(self, z: Tensor) -> Tensor:
        return nx.matmul(z, self.W) + self.b

    def classify(self, z: Tensor) -> Tensor:
        return nx.softmax(self.logits(z))

    def loss(self, batch: Batch) -> Tensor:
        return nx.cross_entropy(self.logits(self.dialog_vectors(batch)), batch.labels)

    def predict_proba(self, batch: Batch) -> np.ndarray:
        with nx.no_grad():
            return self.classify(self.dialog_vectors(batch)).data

    def predict(self, batch: Batch) -> np.ndarray:
        return self.predict_proba(batch).argmax(axis=1)


class ResponseGenerator(DialogModel):
    """GRU decoder initialized from the dialog vector, sharing word embeddings."""

    def __init__(self, cfg: ModelConfig, seed: int = 0, word_vectors=None):
        super().__init__(cfg, seed, word_vectors)
        rng = self.rng
        self.decoder = GruLayer(cfg.word_dim, cfg.dec_hidden, rng, "decoder.gru")
        bound = 1.0 / np.sqrt(cfg.dec_hidden)
        self.W_out = _param(rng, (cfg.dec_hidden, cfg.vocab_size), bound, "decoder.W_out")
        self.b_out = _param(rng, (cfg.vocab_size,), bound, "decoder.b_out")
        self.bridge = None
        if cfg.dec_hidden != cfg.dial_hidden:
            bb = 1.0 / np.sqrt(cfg.dial_hidden)
            self.bridge = (_param(rng, (cfg.dial_hidden, cfg.dec_hidden), bb, "decoder.bridge.W"),
                           _param(rng, (cfg.dec_hidden,), bb, "decoder.bridge.b"))

    def parameters(self):
        params = {**super().parameters(), **self.decoder.parameters(),
                  "decoder.W_out": self.W_out, "decoder.b_out": self.b_out}
        if self.bridge is not None:
            params.update({p.name: p for p in self.bridge})
        return params

    def initial_state(self, z: Tensor) -> Tensor:
        if self.bridge is None:
            return z
        W, b = self.bridge
        return nx.matmul(z, W) + b

    def sequence_loss(self, z: Tensor, response: np.ndarray, lengths: np.ndarray) -> Tensor:
        """Teacher-forced token cross-entropy over response + EOS, mean per token.

        ``response`` is (B, T) with anything past ``lengths`` ignored.
        """
        B, T = response.shape
        if (lengths < 1).any():
            raise ValueError("sequence_loss needs non-empty gold responses")
        inputs = np.concatenate([np.full((B, 1), BOS), response], axis=1)
        targets = np.concatenate([response, np.zeros((B, 1), dtype=np.int64)], axis=1)
        targets[np.arange(B), lengths] = EOS
        xp = self.decoder.project(nx.lookup(self.encoder.word_emb, inputs))
        H = self.cfg.dec_hidden
        x_zr, x_h = xp[:, :, :2 * H], xp[:, :, 2 * H:]
        U_zr, U_h = self.decoder.U[:, :2 * H], self.decoder.U[:, 2 * H:]
        h = self.initial_state(z)
        states = []
        for t in range(T + 1):
            h = GruLayer._step(x_zr[:, t, :], x_h[:, t, :], h, U_zr, U_h, None)
            states.append(h)
        # rows ordered (t, b); keep positions up to and including EOS
        hs = nx.concat(states, axis=0)
        valid = np.arange(T + 1)[:, None] <= lengths[None, :]
        rows = np.flatnonzero(valid.reshape(-1))
        logits = nx.matmul(nx.lookup(hs, rows), self.W_out) + self.b_out
        return nx.cross_entropy(logits, targets.T.reshape(-1)[rows])

    def loss(self, batch: Batch) -> Tensor:
        return self.sequence_loss(self.dialog_vectors(batch), batch.response, batch.response_len)

    def decode_greedy(self, z: Tensor, max_len: int | None = None) -> list[list[int]]:
        """Argmax decoding from BOS until EOS or ``max_len`` tokens; BOS/EOS excluded."""
        max_len = self.cfg.max_len if max_len is None else max_len
        if max_len < 1:
            raise ValueError("max_len must be >= 1")
        with nx.no_grad():
            z = z if z.ndim == 2 else nx.slice_(z, (None, slice(None)))
            h = self.initial_state(z)
            B = h.shape[0]
            tok = np.full(B, BOS, dtype=np.int64)
            out: list[list[int]] = [[] for _ in range(B)]
            done = np.zeros(B, dtype=bool)
            for _ in range(max_len):
                h = self.decoder.step(self.decoder.project(nx.lookup(self.encoder.word_emb, tok)), h)
                logits = nx.matmul(h, self.W_out) + self.b_out
                tok = logits.data.argmax(axis=1)
                for b in np.flatnonzero(~done):
                    if tok[b] == EOS:
                        done[b] = True
                    else:
                        out[b].append(int(tok[b]))
                if done.all():
                    break
        return out

    def generate(self, batch: Batch, max_len: int | None = None) -> list[list[int]]:
        with nx.no_grad():
            z = self.dialog_vectors(batch)
        return self.decode_greedy(z, max_len)


def build_model(cfg: ModelConfig, seed: int = 0, word_vectors=None) -> DialogModel:
    if cfg.task == RECOG:
        return DialogActRecognizer(cfg, seed, word_vectors)
    if cfg.task == GEN:
        return ResponseGenerator(cfg, seed, word_vectors)
    raise ValueError(f"unknown task {cfg.task!r}")
