"""Shared helpers for the experiment scripts."""
from __future__ import annotations

import argparse
import time

import numpy as np

from relspeaker.experiments import DESK_DIMS, headline, prepare, run_cell
from relspeaker.training import TrainConfig


def base_parser(description: str, epochs: int) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--epochs", type=int, default=epochs)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=30)
    return p


def run_grid(splits, task, modes, args, eval_train=False, dims=DESK_DIMS, **prep):
    """Train every (mode, seed) cell and print one line per cell; returns the cells by mode."""
    ds = prepare(splits, task, **prep)
    tcfg = TrainConfig(max_epochs=args.epochs, batch_size=args.batch_size, lr_init=args.lr)
    out = {}
    for mode in modes:
        for seed in range(args.seeds):
            t0 = time.perf_counter()
            cell = run_cell(ds, mode, seed, tcfg, dims, eval_train=eval_train)
            h = headline(cell.test)
            shown = " ".join(f"{k}={v:.2f}" for k, v in h.items())
            print(f"{mode:8s} seed={seed} {shown} ({time.perf_counter() - t0:.0f}s)", flush=True)
            out.setdefault(mode, []).append(cell)
    return ds, out


def mean(values) -> float:
    return float(np.mean(list(values)))
