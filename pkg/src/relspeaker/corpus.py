"""Transcripts, vocabularies, windowed examples, padded batches, synthetic data.

Transcript format (UTF-8, one record per line)::

    == <session_id>
    <speaker>|<da_label or ->|<space separated tokens>

Speakers are ``A`` or ``B``; tokens are lowercased on parsing.
"""
from __future__ import annotations

import io
from collections import Counter
from dataclasses import asdict, dataclass, field, fields
from typing import Iterable, Sequence

import numpy as np

PAD, UNK, BOS, EOS = 0, 1, 2, 3
RESERVED = ("<pad>", "<unk>", "<bos>", "<eos>")
SPEAKERS = ("A", "B")

RECOG = "recog"
GEN = "gen"
TASKS = (RECOG, GEN)


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class Utterance:
    speaker: str
    tokens: tuple
    da: str | int | None = None

    def __post_init__(self):
        if not self.tokens:
            raise CorpusError("utterance has no tokens")


@dataclass(frozen=True)
class Session:
    session_id: str
    utterances: tuple[Utterance, ...]

    @property
    def speakers(self) -> set[str]:
        return {u.speaker for u in self.utterances}


def other_speaker(s: str) -> str:
    return "B" if s == "A" else "A"


# --------------------------------------------------------------------------
# transcript I/O


def parse_transcript(data: bytes | str) -> list[Session]:
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    sessions: list[Session] = []
    sid: str | None = None
    utts: list[Utterance] = []

    def close():
        if sid is None:
            return
        if not utts:
            raise CorpusError(f"session {sid!r} has no utterances")
        _check_speakers(sid, utts)
        sessions.append(Session(sid, tuple(utts)))

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("=="):
            close()
            sid = line[2:].strip()
            if not sid:
                raise CorpusError(f"line {lineno}: empty session id")
            utts = []
            continue
        if sid is None:
            raise CorpusError(f"line {lineno}: utterance before any '== <session_id>' header")
        parts = line.split("|", 2)
        if len(parts) != 3:
            raise CorpusError(f"line {lineno}: expected '<speaker>|<da>|<tokens>'")
        spk, da, toks = (p.strip() for p in parts)
        tokens = tuple(toks.lower().split())
        if not spk or not tokens:
            raise CorpusError(f"line {lineno}: missing speaker or tokens")
        utts.append(Utterance(spk, tokens, None if da in ("", "-") else da))
    close()
    return sessions


def _check_speakers(sid: str, utts: Sequence[Utterance]) -> None:
    seen = list(dict.fromkeys(u.speaker for u in utts))
    if len(seen) > 2:
        raise CorpusError(f"session {sid!r} has {len(seen)} speakers {seen}; at most 2 allowed")
    bad = [s for s in seen if s not in SPEAKERS]
    if bad:
        raise CorpusError(f"session {sid!r}: speaker {bad[0]!r} not in {{A, B}}")


def serialize_transcript(sessions: Iterable[Session]) -> bytes:
    out = io.StringIO()
    for s in sessions:
        out.write(f"== {s.session_id}\n")
        for u in s.utterances:
            da = "-" if u.da is None else str(u.da)
            out.write(f"{u.speaker}|{da}|{' '.join(map(str, u.tokens))}\n")
    return out.getvalue().encode("utf-8")


def collect_labels(sessions: Iterable[Session]) -> list[str]:
    """DA label inventory in first-appearance order."""
    seen: dict[str, None] = {}
    for s in sessions:
        for u in s.utterances:
            if u.da is not None:
                seen.setdefault(str(u.da), None)
    return list(seen)


# --------------------------------------------------------------------------
# vocabulary and word vectors


@dataclass
class Vocabulary:
    tokens: list[str]
    counts: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        self.index = {t: i for i, t in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.tokens == other.tokens and self.counts == other.counts

    def encode(self, tokens: Iterable[str]) -> tuple[int, ...]:
        return tuple(self.index.get(t, UNK) for t in tokens)

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.tokens[i] for i in ids]


def build_vocab(sessions: Iterable[Session], k_vocab: int) -> Vocabulary:
    """Keep the ``k_vocab`` most frequent tokens; ties go to the lexicographically smaller."""
    if k_vocab < 1:
        raise ValueError("k_vocab must be >= 1")
    counts: Counter[str] = Counter()
    for s in sessions:
        for u in s.utterances:
            counts.update(t for t in u.tokens if t not in RESERVED)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:k_vocab]
    return Vocabulary(list(RESERVED) + [t for t, _ in ranked], dict(counts))


def encode_sessions(sessions: Iterable[Session], vocab: Vocabulary,
                    labels: Sequence[str] | None = None) -> list[Session]:
    """Map tokens to ids and (if ``labels`` is given) DA strings to label ids."""
    lab = {l: i for i, l in enumerate(labels)} if labels is not None else None
    out = []
    for s in sessions:
        utts = []
        for u in s.utterances:
            da = u.da
            if lab is not None and da is not None:
                da = lab.get(str(da))
            utts.append(Utterance(u.speaker, vocab.encode(u.tokens), da))
        out.append(Session(s.session_id, tuple(utts)))
    return out


def load_word_vectors(data: bytes | str, vocab: Vocabulary, dim: int, seed: int = 0) -> np.ndarray:
    """Embedding matrix with rows copied from a ``token v1 ... vD`` text file.

    Rows for tokens absent from the file, and for the reserved ids, are
    drawn from uniform(-0.1, 0.1) with ``seed``.
    """
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    rng = np.random.default_rng(seed)
    emb = rng.uniform(-0.1, 0.1, size=(len(vocab), dim))
    for lineno, line in enumerate(text.splitlines(), start=1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) - 1 != dim:
            raise CorpusError(f"line {lineno}: expected {dim} dims, got {len(parts) - 1}")
        i = vocab.index.get(parts[0])
        if i is not None and i >= len(RESERVED):
            emb[i] = [float(v) for v in parts[1:]]
    return emb


# --------------------------------------------------------------------------
# examples and batches


@dataclass(frozen=True)
class Example:
    context: tuple[Utterance, ...]
    task: str
    target: int | Utterance | None
    current_speaker: str
    session_id: str = ""
    position: int = 0  # 1-based index of the last context utterance

    @property
    def target_speaker(self) -> str | None:
        return self.target.speaker if isinstance(self.target, Utterance) else None


def make_examples(sessions: Iterable[Session], task: str, context: int) -> list[Example]:
    """Sliding-window examples over each session.

    Recognition yields one example per utterance that carries a DA label;
    generation yields one per utterance that has a successor.
    """
    if context < 1:
        raise ValueError("context window must be >= 1")
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    out = []
    for s in sessions:
        utts = s.utterances
        for i in range(1, len(utts) + 1):
            ctx = utts[max(0, i - context):i]
            if task == RECOG:
                if utts[i - 1].da is None:
                    continue
                out.append(Example(ctx, task, utts[i - 1].da, utts[i - 1].speaker, s.session_id, i))
            elif i < len(utts):
                nxt = utts[i]
                out.append(Example(ctx, task, nxt, nxt.speaker, s.session_id, i))
    return out


@dataclass
class Batch:
    """Flattened padded batch.

    Every context utterance of every example is one row of ``tokens``;
    ``dialog_rows`` maps (example, step) to that row, padded with row 0
    where ``dialog_mask`` is False.
    """
    tokens: np.ndarray        # (N, L) int
    token_mask: np.ndarray    # (N, L) bool
    speakers: np.ndarray      # (N,) int, 0 = A, 1 = B
    owner: np.ndarray         # (N,) example index of each row
    dialog_rows: np.ndarray   # (B, M) int
    dialog_mask: np.ndarray   # (B, M) bool
    current: np.ndarray       # (B,) int current speaker
    labels: np.ndarray | None = None      # (B,) DA ids
    response: np.ndarray | None = None    # (B, T) token ids, PAD after the end
    response_len: np.ndarray | None = None
    examples: list[Example] = field(default_factory=list)

    @property
    def size(self) -> int:
        return self.dialog_rows.shape[0]

    @property
    def own(self) -> np.ndarray:
        """Per-row flag: speaker equals the owning example's current speaker."""
        return self.speakers == self.current[self.owner]


def _spk(s: str) -> int:
    return SPEAKERS.index(s)


def collate(examples: Sequence[Example], pad_id: int = PAD) -> Batch:
    utts = [u for ex in examples for u in ex.context]
    n = len(utts)
    lmax = max(len(u.tokens) for u in utts)
    tokens = np.full((n, lmax), pad_id, dtype=np.int64)
    mask = np.zeros((n, lmax), dtype=bool)
    for r, u in enumerate(utts):
        tokens[r, :len(u.tokens)] = u.tokens
        mask[r, :len(u.tokens)] = True
    mmax = max(len(ex.context) for ex in examples)
    rows = np.zeros((len(examples), mmax), dtype=np.int64)
    dmask = np.zeros((len(examples), mmax), dtype=bool)
    owner = np.empty(n, dtype=np.int64)
    r = 0
    for b, ex in enumerate(examples):
        m = len(ex.context)
        rows[b, :m] = np.arange(r, r + m)
        dmask[b, :m] = True
        owner[r:r + m] = b
        r += m
    batch = Batch(
        tokens=tokens,
        token_mask=mask,
        speakers=np.array([_spk(u.speaker) for u in utts], dtype=np.int64),
        owner=owner,
        dialog_rows=rows,
        dialog_mask=dmask,
        current=np.array([_spk(resolve_speaker(ex)) for ex in examples], dtype=np.int64),
        examples=list(examples),
    )
    if examples[0].task == RECOG:
        batch.labels = np.array([ex.target for ex in examples], dtype=np.int64)
    elif all(ex.target is not None for ex in examples):
        tmax = max(len(ex.target.tokens) for ex in examples)
        resp = np.full((len(examples), tmax), pad_id, dtype=np.int64)
        for b, ex in enumerate(examples):
            resp[b, :len(ex.target.tokens)] = ex.target.tokens
        batch.response = resp
        batch.response_len = np.array([len(ex.target.tokens) for ex in examples], dtype=np.int64)
    return batch


def resolve_speaker(ex: Example) -> str:
    # kept here so collate does not import encoders; encoders re-exports it
    if ex.task == RECOG:
        return ex.context[-1].speaker
    if ex.target_speaker is not None:
        return ex.target_speaker
    return other_speaker(ex.context[-1].speaker)


def batchify(examples: Sequence[Example], batch_size: int, pad_id: int = PAD,
             rng: np.random.Generator | None = None) -> list[Batch]:
    """Split into padded batches; shuffles example order first when ``rng`` is given."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    order = np.arange(len(examples))
    if rng is not None:
        rng.shuffle(order)
    return [collate([examples[i] for i in order[s:s + batch_size]], pad_id)
            for s in range(0, len(order), batch_size)]


# --------------------------------------------------------------------------
# synthetic corpora

OTHER, SAME, DIFF, MARKED = "OTHER", "SAME", "DIFF", "MARKED"
ROLE_MARKER = "<role>"
SAME_PHRASE = ("so", "as", "i", "was", "saying")
DIFF_PHRASE = ("right", "well", "i", "think", "that", "too")


@dataclass(frozen=True)
class SynthConfig:
    """Knobs for the synthetic relation corpus.

    ``marked`` switches on the role-dependent MARKED class; ``marker`` makes
    the primary role prefix each of its utterances with a marker token
    (which also reveals speaker identity to a speaker-blind model).  With
    ``keyed`` every utterance after the first is a fixed phrase chosen by
    whether its speaker repeats, so the next response is determined by the
    responder's relation to the last speaker.
    """
    n_train: int = 2000
    n_dev: int = 250
    n_test: int = 250
    utterances: int = 20
    vocab_size: int = 50
    min_tokens: int = 2
    max_tokens: int = 4
    p_alt: float = 0.5
    rho: float = 0.5
    eps: float = 0.0
    marked: bool = True
    marker: bool = False
    keyed: bool = False
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.p_alt < 1.0:
            raise ValueError(f"p_alt must be in (0, 1), got {self.p_alt}")
        if not 0.5 <= self.rho <= 1.0:
            raise ValueError(f"rho must be in [0.5, 1.0], got {self.rho}")
        if not 0.0 <= self.eps < 0.5:
            raise ValueError(f"eps must be in [0, 0.5), got {self.eps}")
        if min(self.n_train, self.n_dev, self.n_test) < 0 or self.utterances < 1:
            raise ValueError("session counts must be >= 0 and utterances >= 1")
        if not 1 <= self.min_tokens <= self.max_tokens:
            raise ValueError("need 1 <= min_tokens <= max_tokens")
        if self.vocab_size < 1:
            raise ValueError("vocab_size must be >= 1")

    def to_text(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in asdict(self).items())

    @classmethod
    def from_text(cls, text: str, **overrides) -> "SynthConfig":
        """Parse ``key=value`` lines (``#`` comments allowed); unknown keys are errors."""
        types = {f.name: type(f.default) for f in fields(cls)}
        kw = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = (x.strip() for x in line.partition("="))
            if not sep or key not in types:
                raise ValueError(f"line {lineno}: expected <field>=<value> with a SynthConfig field")
            if types[key] is bool:
                if value.lower() not in ("true", "false", "1", "0"):
                    raise ValueError(f"line {lineno}: {key} needs true/false, got {value!r}")
                kw[key] = value.lower() in ("true", "1")
            else:
                kw[key] = types[key](value)
        kw.update(overrides)
        return cls(**kw)


def synth_label(prev_role: int | None, role: int, primary_role: int, cfg: SynthConfig,
                flip: bool) -> str:
    if prev_role is None:
        return OTHER
    same = role == prev_role
    if cfg.marked and same and role == primary_role:
        return MARKED
    return SAME if same != flip else DIFF


def _synth_session(rng: np.random.Generator, cfg: SynthConfig, sid: str, rho: float) -> Session:
    # roles: 0 = primary, 1 = secondary; annotation maps roles onto A/B
    primary_is_a = rng.random() < rho
    label_of = ("A", "B") if primary_is_a else ("B", "A")
    role = int(rng.integers(2))
    prev = None
    utts = []
    for i in range(cfg.utterances):
        if i > 0 and rng.random() < cfg.p_alt:
            role = 1 - role
        flip = rng.random() < cfg.eps
        n = int(rng.integers(cfg.min_tokens, cfg.max_tokens + 1))
        words = [f"w{j}" for j in rng.integers(cfg.vocab_size, size=n)]
        if cfg.keyed and prev is not None:
            words = list(SAME_PHRASE if role == prev else DIFF_PHRASE)
        if cfg.marker and role == 0:
            words = [ROLE_MARKER] + words
        utts.append(Utterance(label_of[role], tuple(words), synth_label(prev, role, 0, cfg, flip)))
        prev = role
    return Session(sid, tuple(utts))


def gen_synthetic(cfg: SynthConfig) -> dict[str, list[Session]]:
    """Train/dev/test sessions; the seed alone determines the output."""
    rng = np.random.default_rng(cfg.seed)
    out = {}
    for split, n, rho in (("train", cfg.n_train, cfg.rho), ("dev", cfg.n_dev, 0.5),
                          ("test", cfg.n_test, 0.5)):
        out[split] = [_synth_session(rng, cfg, f"{split}-{k:05d}", rho) for k in range(n)]
    return out


def synth_marginals(cfg: SynthConfig) -> dict[str, float]:
    """Analytic label distribution over utterances of a synthetic session.

    Roles follow a symmetric two-state chain started uniformly, so each
    utterance is primary with probability 1/2 and repeats its predecessor's
    speaker with probability ``1 - p_alt``.
    """
    n = cfg.utterances
    rep = 1.0 - cfg.p_alt
    later = (n - 1) / n
    same_mass = rep * later
    diff_mass = cfg.p_alt * later
    out = {OTHER: 1.0 / n}
    if cfg.marked:
        out[MARKED] = same_mass / 2
        kept_same = same_mass / 2
    else:
        out[MARKED] = 0.0
        kept_same = same_mass
    # label noise swaps SAME and DIFF (MARKED is never flipped)
    out[SAME] = kept_same * (1 - cfg.eps) + diff_mass * cfg.eps
    out[DIFF] = diff_mass * (1 - cfg.eps) + kept_same * cfg.eps
    return out
