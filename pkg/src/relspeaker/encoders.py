"""GRU encoders and the five utterance-encoding strategies.

Modes:

* ``none``    token encoding only
* ``abs-emb`` token encoding + speaker row (row 0 for A, row 1 for B)
* ``abs-enc`` separate token encoders for A and B
* ``rel-emb`` token encoding + row 0 if the speaker is the current speaker, else row 1
* ``rel-enc`` separate "own" / "other" token encoders

All five share the dialog-level GRU; only the utterance vectors differ.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import numerics as nx
from .corpus import Batch, Example, resolve_speaker
from .numerics import Tensor

__all__ = [
    "SpeakerMode", "EncoderConfig", "GruLayer", "TokenEncoder", "HierarchicalEncoder",
    "gru_cell", "resolve_current_speaker",
]


class SpeakerMode(str, enum.Enum):
    NONE = "none"
    ABS_EMB = "abs-emb"
    ABS_ENC = "abs-enc"
    REL_EMB = "rel-emb"
    REL_ENC = "rel-enc"

    @property
    def uses_embedding(self) -> bool:
        return self in (SpeakerMode.ABS_EMB, SpeakerMode.REL_EMB)

    @property
    def uses_two_encoders(self) -> bool:
        return self in (SpeakerMode.ABS_ENC, SpeakerMode.REL_ENC)

    @property
    def relative(self) -> bool:
        return self in (SpeakerMode.REL_EMB, SpeakerMode.REL_ENC)


ALL_MODES = tuple(m.value for m in SpeakerMode)


@dataclass(frozen=True)
class EncoderConfig:
    vocab_size: int = 10004
    word_dim: int = 200
    hidden: int = 300
    dial_hidden: int = 300
    spk_dim: int = 30
    mode: str = "none"

    @property
    def utterance_dim(self) -> int:
        extra = self.spk_dim if SpeakerMode(self.mode).uses_embedding else 0
        return 2 * self.hidden + extra


def resolve_current_speaker(example: Example) -> str:
    """Speaker whose perspective is "own".

    Recognition: the speaker of the classified (last) utterance.  Generation:
    the responder; without a gold target, strict alternation is assumed.
    """
    return resolve_speaker(example)


def _uniform(rng, shape, bound, name):
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True, name=name)


class GruLayer:
    """One GRU direction.

    Gate layout of ``W`` (input) and ``U`` (recurrent) columns is
    [update | reset | candidate]; the candidate applies the reset gate
    before the recurrent product, ``tanh(W_h x + U_h (r * h) + b_h)``.
    """

    def __init__(self, input_dim: int, hidden: int, rng: np.random.Generator, name: str,
                 direction: str = "forward"):
        self.input_dim, self.hidden, self.direction = input_dim, hidden, direction
        bound = 1.0 / np.sqrt(hidden)
        self.W = _uniform(rng, (input_dim, 3 * hidden), bound, f"{name}.W")
        self.U = _uniform(rng, (hidden, 3 * hidden), bound, f"{name}.U")
        self.b = _uniform(rng, (3 * hidden,), bound, f"{name}.b")

    def parameters(self) -> dict[str, Tensor]:
        return {p.name: p for p in (self.W, self.U, self.b)}

    def project(self, x: Tensor) -> Tensor:
        """Input contribution to all three gates for every position at once."""
        return nx.matmul(x, self.W) + self.b

    def step(self, xp: Tensor, h: Tensor, mask: np.ndarray | None = None) -> Tensor:
        """Advance one step from a pre-projected input ``xp`` (N, 3H).

        Rows where ``mask`` is False keep ``h`` unchanged exactly.
        """
        H = self.hidden
        return self._step(xp[:, :2 * H], xp[:, 2 * H:], h,
                          self.U[:, :2 * H], self.U[:, 2 * H:], mask)

    @staticmethod
    def _step(x_zr, x_h, h, U_zr, U_h, mask):
        H = h.shape[1]
        zr = nx.sigmoid(x_zr + nx.matmul(h, U_zr))
        z, r = zr[:, :H], zr[:, H:]
        cand = nx.tanh(x_h + nx.matmul(r * h, U_h))
        if mask is not None:
            z = z * mask[:, None].astype(float)
        # (1 - z) * h + z * cand, written so a zero gate leaves h bit-identical
        return h + z * (cand - h)

    def run(self, x: Tensor, mask: np.ndarray, h0: Tensor | None = None) -> Tensor:
        """Final state over ``x`` (N, T, D) with a right-padded (N, T) mask."""
        n, T = mask.shape
        H = self.hidden
        xp = self.project(x)
        x_zr, x_h = xp[:, :, :2 * H], xp[:, :, 2 * H:]
        U_zr, U_h = self.U[:, :2 * H], self.U[:, 2 * H:]
        h = h0 if h0 is not None else Tensor(np.zeros((n, H)))
        steps = range(T - 1, -1, -1) if self.direction == "backward" else range(T)
        for t in steps:
            col = mask[:, t]
            h = self._step(x_zr[:, t, :], x_h[:, t, :], h, U_zr, U_h,
                           None if col.all() else col)
        return h


def gru_cell(x: Tensor, h_prev: Tensor, layer: GruLayer) -> Tensor:
    """Single GRU update for unprojected input ``x``.  Accepts (D,) or (N, D)."""
    single = x.ndim == 1
    if x.shape[-1] != layer.input_dim or h_prev.shape[-1] != layer.hidden:
        raise ValueError(
            f"gru_cell expects input dim {layer.input_dim} and hidden {layer.hidden}, "
            f"got {x.shape} and {h_prev.shape}")
    if single:
        x = nx.slice_(x, (None, slice(None)))
        h_prev = nx.slice_(h_prev, (None, slice(None)))
    h = layer.step(layer.project(x), h_prev)
    return h[0] if single else h


class TokenEncoder:
    """Bidirectional GRU over word embeddings -> [fwd final ; bwd final]."""

    def __init__(self, word_dim: int, hidden: int, rng: np.random.Generator, name: str):
        self.fwd = GruLayer(word_dim, hidden, rng, f"{name}.fwd", "forward")
        self.bwd = GruLayer(word_dim, hidden, rng, f"{name}.bwd", "backward")

    def parameters(self) -> dict[str, Tensor]:
        return {**self.fwd.parameters(), **self.bwd.parameters()}

    def __call__(self, emb: Tensor, mask: np.ndarray) -> Tensor:
        if not mask.any(axis=1).all():
            raise ValueError("encode_tokens: an utterance has no unmasked tokens")
        return nx.concat([self.fwd.run(emb, mask), self.bwd.run(emb, mask)], axis=-1)


class HierarchicalEncoder:
    """Word embeddings -> utterance vectors (mode-dependent) -> dialog GRU."""

    def __init__(self, cfg: EncoderConfig, rng: np.random.Generator,
                 word_vectors: np.ndarray | None = None):
        self.cfg = cfg
        self.mode = SpeakerMode(cfg.mode)
        if word_vectors is not None:
            if word_vectors.shape != (cfg.vocab_size, cfg.word_dim):
                raise ValueError(f"word vectors {word_vectors.shape} do not match "
                                 f"({cfg.vocab_size}, {cfg.word_dim})")
            emb = np.array(word_vectors, dtype=float)
        else:
            emb = rng.uniform(-0.1, 0.1, size=(cfg.vocab_size, cfg.word_dim))
        self.word_emb = Tensor(emb, requires_grad=True, name="encoder.word_emb")
        # two token encoders for *-enc: index 0 = A / own, 1 = B / other
        n_enc = 2 if self.mode.uses_two_encoders else 1
        self.token_encoders = [TokenEncoder(cfg.word_dim, cfg.hidden, rng, f"encoder.utt{k}")
                               for k in range(n_enc)]
        self.spk_emb = None
        if self.mode.uses_embedding:
            self.spk_emb = _uniform(rng, (2, cfg.spk_dim), 0.1, "encoder.spk_emb")
        self.dialog = GruLayer(cfg.utterance_dim, cfg.dial_hidden, rng, "encoder.dial")

    def parameters(self) -> dict[str, Tensor]:
        params = {self.word_emb.name: self.word_emb}
        for enc in self.token_encoders:
            params.update(enc.parameters())
        if self.spk_emb is not None:
            params[self.spk_emb.name] = self.spk_emb
        params.update(self.dialog.parameters())
        return params

    def encode_tokens(self, tokens: np.ndarray, mask: np.ndarray, which: int = 0) -> Tensor:
        return self.token_encoders[which](nx.lookup(self.word_emb, tokens), mask)

    def speaker_index(self, batch: Batch) -> np.ndarray:
        """Per-row speaker slot: absolute label for abs-*, own(0)/other(1) for rel-*."""
        if self.mode.relative:
            return np.where(batch.own, 0, 1)
        return batch.speakers

    def encode_utterances(self, batch: Batch) -> Tensor:
        """Utterance vectors for every row of ``batch`` -> (N, utterance_dim)."""
        mode = self.mode
        if mode.uses_two_encoders:
            emb = nx.lookup(self.word_emb, batch.tokens)
            first = self.speaker_index(batch) == 0
            if first.all() or not first.any():
                return self.token_encoders[0 if first.all() else 1](emb, batch.token_mask)
            u0 = self.token_encoders[0](emb, batch.token_mask)
            u1 = self.token_encoders[1](emb, batch.token_mask)
            m = first[:, None].astype(float)
            return u0 * m + u1 * (1.0 - m)
        u = self.encode_tokens(batch.tokens, batch.token_mask)
        if mode.uses_embedding:
            u = nx.concat([u, nx.lookup(self.spk_emb, self.speaker_index(batch))], axis=-1)
        return u

    def encode_dialog(self, utt: Tensor, batch: Batch) -> Tensor:
        if batch.dialog_rows.shape[1] == 0:
            raise ValueError("encode_dialog: empty utterance sequence")
        seq = nx.lookup(utt, batch.dialog_rows)
        return self.dialog.run(seq, batch.dialog_mask)

    def __call__(self, batch: Batch) -> Tensor:
        return self.encode_dialog(self.encode_utterances(batch), batch)
