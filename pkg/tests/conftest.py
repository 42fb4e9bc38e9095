from __future__ import annotations

import numpy as np
import pytest

from relspeaker.corpus import Session, Utterance, collate, make_examples

_CRITERIA: list[tuple[int, str, str, str]] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        n, title = mark.args
        detail = dict(item.user_properties).get("detail", "")
        _CRITERIA.append((n, title, "PASS" if rep.passed else "FAIL", detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n, title, status, detail in sorted(_CRITERIA):
        line = f"criterion {n:2d} {status}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))


def random_session(rng: np.random.Generator, n_utts: int, vocab: int = 20, max_tokens: int = 4,
                   sid: str = "s") -> Session:
    """Session of already-encoded token ids (reserved ids skipped), labels 0/1."""
    utts = []
    for _ in range(n_utts):
        n = int(rng.integers(1, max_tokens + 1))
        toks = tuple(int(t) for t in rng.integers(4, vocab, size=n))
        utts.append(Utterance(str(rng.choice(["A", "B"])), toks, int(rng.integers(2))))
    return Session(sid, tuple(utts))


def swap_speakers(s: Session) -> Session:
    flip = {"A": "B", "B": "A"}
    return Session(s.session_id, tuple(Utterance(flip[u.speaker], u.tokens, u.da)
                                       for u in s.utterances))


def last_example(s: Session, task: str, context: int = 10):
    ex = make_examples([s], task, context)
    return ex[-1]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def batch_of():
    def _make(examples):
        return collate(examples)
    return _make
