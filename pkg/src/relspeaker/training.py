"""Epoch loop with Adam, dev-driven learning-rate halving and early stopping."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import numerics as nx
from .corpus import RECOG, Example, batchify
from .models import DialogModel, ModelConfig, build_model

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    max_epochs: int = 20
    batch_size: int = 30
    lr_init: float = 1e-3
    lr_floor: float = 1e-7
    seed: int = 0

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if not 0 < self.lr_floor < self.lr_init:
            raise ValueError("need 0 < lr_floor < lr_init")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


class HalvingSchedule:
    """Halve the rate whenever dev loss fails to beat the best seen so far."""

    def __init__(self, lr_init: float, lr_floor: float):
        self.lr = lr_init
        self.floor = lr_floor
        self.best = math.inf

    def update(self, dev_loss: float) -> bool:
        """Record an epoch's dev loss; returns True if it improved on the best."""
        if dev_loss < self.best:
            self.best = dev_loss
            return True
        self.lr /= 2.0
        return False

    @property
    def exhausted(self) -> bool:
        return self.lr < self.floor


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev_loss: float
    lr: float
    improved: bool
    wall_time: float = 0.0


@dataclass
class TrainHistory:
    epochs: list[EpochRecord] = field(default_factory=list)
    stop_reason: str = ""

    def __len__(self) -> int:
        return len(self.epochs)

    @property
    def best_epoch(self) -> int:
        return min(self.epochs, key=lambda e: (e.dev_loss, e.epoch)).epoch

    def to_text(self) -> str:
        """Line-per-epoch report; wall times are left out so reruns diff clean."""
        lines = ["# epoch train_loss dev_loss lr improved"]
        for e in self.epochs:
            lines.append(f"{e.epoch} {e.train_loss!r} {e.dev_loss!r} {e.lr!r} {int(e.improved)}")
        lines.append(f"# stop: {self.stop_reason}")
        lines.append(f"# best_epoch: {self.best_epoch if self.epochs else 0}")
        return "\n".join(lines) + "\n"


@dataclass
class TrainResult:
    model: DialogModel
    history: TrainHistory
    best_dev_loss: float


def _weight(model: DialogModel, batch) -> float:
    if model.cfg.task == RECOG:
        return float(batch.size)
    return float((batch.response_len + 1).sum())


def evaluate_loss(model: DialogModel, examples: Sequence[Example], batch_size: int = 200) -> float:
    """Mean loss over a full pass (per example for recognition, per token for generation)."""
    total = weight = 0.0
    with nx.no_grad():
        for batch in batchify(examples, batch_size):
            w = _weight(model, batch)
            total += float(model.loss(batch).data) * w
            weight += w
    return total / weight


def train(cfg: TrainConfig, train_examples: Sequence[Example], dev_examples: Sequence[Example],
          word_vectors: np.ndarray | None = None, model: DialogModel | None = None) -> TrainResult:
    """Train until ``max_epochs`` or the rate drops below ``lr_floor``.

    The returned model carries the parameters of the best-dev-loss epoch.
    """
    if not train_examples or not dev_examples:
        raise ValueError("train and dev splits must be non-empty")
    seeds = np.random.SeedSequence(cfg.seed).spawn(2)
    if model is None:
        model = build_model(cfg.model, seed=int(seeds[0].generate_state(1)[0]),
                            word_vectors=word_vectors)
    shuffle_rng = np.random.default_rng(seeds[1])
    params = model.parameters()
    opt = nx.Adam(params)
    sched = HalvingSchedule(cfg.lr_init, cfg.lr_floor)
    history = TrainHistory()
    best_state = model.state()

    for epoch in range(1, cfg.max_epochs + 1):
        t0 = time.perf_counter()
        lr = sched.lr
        total = weight = 0.0
        for i, batch in enumerate(batchify(train_examples, cfg.batch_size, rng=shuffle_rng)):
            opt.zero_grad()
            loss = model.loss(batch)
            value = float(loss.data)
            if not math.isfinite(value):
                raise TrainingDiverged(f"non-finite loss {value} at epoch {epoch}, batch {i}")
            loss.backward()
            opt.step(lr)
            w = _weight(model, batch)
            total += value * w
            weight += w
        dev_loss = evaluate_loss(model, dev_examples)
        if not math.isfinite(dev_loss):
            raise TrainingDiverged(f"non-finite dev loss at epoch {epoch}")
        improved = sched.update(dev_loss)
        if improved:
            best_state = model.state()
        history.epochs.append(EpochRecord(epoch, total / weight, dev_loss, lr, improved,
                                          time.perf_counter() - t0))
        log.info("epoch %d train %.4f dev %.4f lr %.2e%s", epoch, total / weight, dev_loss, lr,
                 " *" if improved else "")
        if sched.exhausted:
            history.stop_reason = f"lr {sched.lr:.3e} below floor {cfg.lr_floor:.0e}"
            break
    else:
        history.stop_reason = "max_epochs"

    model.load_state(best_state)
    return TrainResult(model, history, sched.best)
