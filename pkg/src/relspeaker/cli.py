"""Command-line entry points.

Exit codes: 0 success, 1 runtime failure (e.g. a non-finite loss), 2 usage
error (bad flags, missing or malformed inputs, task mismatch).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

from . import __version__
from . import checkpoint as ckpt
from .corpus import (GEN, RECOG, TASKS, CorpusError, SynthConfig, batchify, gen_synthetic,
                     load_word_vectors, parse_transcript, serialize_transcript)
from .encoders import ALL_MODES
from .experiments import (Comparison, Dataset, evaluate, format_report, model_config, prepare,
                          run_cell, significance_vs_baseline)
from .stats import mcnemar_from_correct, wilcoxon_signed_rank
from .training import TrainConfig, TrainingDiverged, train

log = logging.getLogger("relspeaker")

SPLITS = ("train", "dev", "test")


class UsageError(Exception):
    """Bad input detected after argument parsing; maps to exit code 2."""


def sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out: Path, command: str, argv, config: dict, seed, inputs, artifacts,
                   wall: dict) -> None:
    manifest = {
        "command": command,
        "argv": list(argv),
        "version": __version__,
        "seed": seed,
        "config": config,
        "inputs": {str(p): sha256(p) for p in inputs},
        "artifacts": {str(p): sha256(p) for p in artifacts},
        "wall_time": wall,  # the only non-reproducible field
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def read_corpus(path: Path, splits=SPLITS, required=("train", "dev")) -> tuple[dict, list[Path]]:
    path = Path(path)
    if not path.exists():
        raise UsageError(f"corpus path {path} does not exist")
    if path.is_file():
        files = {"test": path}
    else:
        files = {s: path / f"{s}.txt" for s in splits if (path / f"{s}.txt").exists()}
    missing = [s for s in required if s not in files]
    if missing:
        raise UsageError(f"corpus {path} lacks {', '.join(s + '.txt' for s in missing)}")
    out = {}
    for split, f in files.items():
        try:
            out[split] = parse_transcript(f.read_bytes())
        except CorpusError as e:
            raise UsageError(f"{f}: {e}") from None
    return out, list(files.values())


# --------------------------------------------------------------------------
# commands


SYNTH_FLAGS = {"utterances": "utterances", "vocab_size": "vocab_size", "p_alt": "p_alt",
               "rho": "rho", "eps": "eps", "marked": "marked", "marker": "marker",
               "keyed": "keyed", "seed": "seed"}


def synth_config_from(args) -> SynthConfig:
    """Config file (if any) first, then every flag given on the command line."""
    over = {f: getattr(args, a) for f, a in SYNTH_FLAGS.items() if getattr(args, a) is not None}
    if args.sessions is not None:
        over["n_train"] = args.sessions
        over["n_dev"] = over["n_test"] = max(1, args.sessions // 8)
    if args.eval_sessions is not None:
        over["n_dev"] = over["n_test"] = args.eval_sessions
    try:
        if args.config:
            cfg_path = Path(args.config)
            if not cfg_path.exists():
                raise UsageError(f"config file {cfg_path} does not exist")
            return SynthConfig.from_text(cfg_path.read_text(), **over)
        return SynthConfig(**over)
    except ValueError as e:
        msg = str(e)
        field = msg.split()[0]
        if field in SYNTH_FLAGS or field == "n_train":
            flag = "sessions" if field == "n_train" else field.replace("_", "-")
            raise UsageError(f"--{flag}{msg[len(field):]}") from None
        raise UsageError(msg) from None


def cmd_gen_synth(args) -> int:
    cfg = synth_config_from(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    paths = []
    for split, sessions in gen_synthetic(cfg).items():
        p = out / f"{split}.txt"
        p.write_bytes(serialize_transcript(sessions))
        paths.append(p)
    (out / "synth.cfg").write_text(cfg.to_text())
    paths.append(out / "synth.cfg")
    write_manifest(out, "gen-synth", args.argv, asdict(cfg), cfg.seed, [], paths,
                   {"total": time.perf_counter() - t0})
    print(f"wrote {', '.join(str(p) for p in paths)}")
    return 0


def dims_from(args) -> dict:
    return dict(word_dim=args.word_dim, hidden=args.hidden, dial_hidden=args.dial_hidden,
                spk_dim=args.spk_dim, dec_hidden=args.dec_hidden, max_len=args.max_len)


def train_config_from(args, mcfg=None) -> TrainConfig:
    try:
        kw = dict(max_epochs=args.epochs, batch_size=args.batch_size, lr_init=args.lr,
                  lr_floor=args.lr_floor, seed=getattr(args, "seed", 0))
        return TrainConfig(model=mcfg, **kw) if mcfg else TrainConfig(**kw)
    except ValueError as e:
        raise UsageError(str(e)) from None


def cmd_train(args) -> int:
    splits, inputs = read_corpus(args.corpus, splits=("train", "dev"))
    ds = prepare(splits, args.task, k_vocab=args.vocab_size, context=args.context)
    if not ds.examples["train"] or not ds.examples["dev"]:
        raise UsageError("corpus yields no training or dev examples for this task")
    mcfg = model_config(ds, args.mode, **dims_from(args))
    cfg = train_config_from(args, mcfg)
    vectors = None
    if args.word_vectors:
        wv = Path(args.word_vectors)
        if not wv.exists():
            raise UsageError(f"word vector file {wv} does not exist")
        try:
            vectors = load_word_vectors(wv.read_bytes(), ds.vocab, mcfg.word_dim, seed=args.seed)
        except CorpusError as e:
            raise UsageError(f"{wv}: {e}") from None
        inputs.append(wv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    res = train(cfg, ds.examples["train"], ds.examples["dev"], word_vectors=vectors)
    ck_path, hist_path = out / "model.ckpt", out / "history.txt"
    ckpt.save(ck_path, res.model, ds.vocab, ds.labels, extra={"train": cfg.to_dict()})
    hist_path.write_text(res.history.to_text())
    write_manifest(out, "train", args.argv, cfg.to_dict(), args.seed, inputs,
                   [ck_path, hist_path],
                   {"total": time.perf_counter() - t0,
                    "epochs": [e.wall_time for e in res.history.epochs]})
    last = res.history.epochs[-1]
    print(f"epochs: {len(res.history)}\nfinal_train_loss: {last.train_loss:.6f}\n"
          f"best_dev_loss: {res.best_dev_loss:.6f}\nstop: {res.history.stop_reason}")
    return 0


def _load_for_eval(args):
    path = Path(args.checkpoint)
    if not path.exists():
        raise UsageError(f"checkpoint {path} does not exist")
    try:
        ck = ckpt.load(path)
    except ckpt.CheckpointError as e:
        raise UsageError(f"{path}: {e}") from None
    if args.task and args.task != ck.config.task:
        raise UsageError(f"task mismatch: checkpoint was trained for {ck.config.task!r}, "
                         f"--task asked for {args.task!r}")
    splits, inputs = read_corpus(args.corpus, splits=("test",), required=("test",))
    unknown = sorted({u.da for s in splits["test"] for u in s.utterances
                      if u.da is not None} - set(ck.labels))
    if ck.config.task == RECOG and unknown:
        raise UsageError(f"test labels unknown to the checkpoint: {', '.join(unknown)}")
    ds = prepare(splits, ck.config.task, context=ck.config.window, vocab=ck.vocab,
                 labels=ck.labels)
    if not ds.examples["test"]:
        raise UsageError("test corpus yields no examples for this task")
    return ck, ds, [path] + inputs


def cmd_eval(args) -> int:
    ck, ds, inputs = _load_for_eval(args)
    model = ck.build()
    kw = {} if ck.config.task == RECOG else {"sif_a": args.sif_a, "max_len": args.max_len}
    ev = evaluate(model, ds, "test", **kw)
    meta = {"task": ck.config.task, "mode": ck.config.mode,
            "checkpoint_sha256": sha256(Path(args.checkpoint))}
    text = format_report(ev, ds.labels, meta)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_generate(args) -> int:
    args.task = args.task or GEN
    ck, ds, _ = _load_for_eval(args)
    model = ck.build()
    lines = []
    for batch in batchify(ds.examples["test"], 200):
        for ex, hyp in zip(batch.examples, model.generate(batch, args.max_len)):
            lines.append(f"{ex.session_id}\t{ex.position}\t{ex.current_speaker}\t"
                         + " ".join(ds.vocab.decode(hyp)))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _cell(job):
    ds, mode, seed, tcfg, dims = job
    c = run_cell(ds, mode, seed, tcfg, dims)
    c.result.model = None  # not needed downstream; keeps results picklable and small
    return c


def parse_modes(text: str) -> list[str]:
    if text == "all":
        return list(ALL_MODES)
    modes = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in modes if m not in ALL_MODES]
    if bad or not modes:
        raise UsageError(f"--modes: unknown mode(s) {bad}; choose from {', '.join(ALL_MODES)} or all")
    return sorted(set(modes), key=list(ALL_MODES).index)


def cmd_compare(args) -> int:
    modes = parse_modes(args.modes)
    if args.seeds < 1:
        raise UsageError("--seeds must be >= 1")
    splits, inputs = read_corpus(args.corpus, required=SPLITS)
    ds: Dataset = prepare(splits, args.task, k_vocab=args.vocab_size, context=args.context)
    tcfg = train_config_from(args)
    jobs = [(ds, m, s, tcfg, dims_from(args)) for m in modes for s in range(args.seeds)]
    t0 = time.perf_counter()
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            cells = list(pool.map(_cell, jobs))
    else:
        cells = [_cell(j) for j in jobs]
    tests = significance_vs_baseline(cells, ds.task) if len(modes) > 1 else {}
    text = Comparison(ds.task, cells, tests).to_text()
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
        (out / "compare.txt").write_text(text)
        write_manifest(out, "compare", args.argv, tcfg.to_dict(), list(range(args.seeds)),
                       inputs, [out / "compare.txt"], {"total": time.perf_counter() - t0})
    sys.stdout.write(text)
    return 0


def _read_column(path: str, kind):
    p = Path(path)
    if not p.exists():
        raise UsageError(f"{p} does not exist")
    try:
        return [kind(float(x)) for x in p.read_text().split()]
    except ValueError as e:
        raise UsageError(f"{p}: {e}") from None


def cmd_signif(args) -> int:
    if args.test == "mcnemar":
        a, b = _read_column(args.a, bool), _read_column(args.b, bool)
        if len(a) != len(b):
            raise UsageError("paired files differ in length")
        r = mcnemar_from_correct(a, b, method=args.method)
    else:
        a, b = _read_column(args.a, float), _read_column(args.b, float)
        if len(a) != len(b) or not a:
            raise UsageError("paired files must be non-empty and equal in length")
        r = wilcoxon_signed_rank(a, b, method=args.method, seed=args.seed)
    print(f"test: {r.name}\nn: {r.n}\nstatistic: {r.statistic:.6f}\n"
          f"p_value: {r.p_value:.6g}\nbranch: {r.branch}\ndegenerate: {int(r.degenerate)}")
    return 0


# --------------------------------------------------------------------------
# parser


def _hyper(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model and training")
    g.add_argument("--task", choices=TASKS, default=RECOG)
    g.add_argument("--epochs", type=int, default=20)
    g.add_argument("--batch-size", type=int, default=30)
    g.add_argument("--lr", type=float, default=1e-3)
    g.add_argument("--lr-floor", type=float, default=1e-7)
    g.add_argument("--vocab-size", type=int, default=10000, help="most frequent tokens kept")
    g.add_argument("--context", type=int, default=None,
                   help="utterances per example (default 5 recog, 4 gen)")
    g.add_argument("--word-dim", type=int, default=200)
    g.add_argument("--hidden", type=int, default=300)
    g.add_argument("--dial-hidden", type=int, default=300)
    g.add_argument("--spk-dim", type=int, default=30)
    g.add_argument("--dec-hidden", type=int, default=300)
    g.add_argument("--max-len", type=int, default=30)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relspeaker", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="write a synthetic train/dev/test corpus")
    p.add_argument("--config", default=None, help="key=value SynthConfig file; flags override it")
    p.add_argument("--sessions", type=int, default=None, help="training sessions (default 2000)")
    p.add_argument("--eval-sessions", type=int, default=None,
                   help="dev and test sessions each (default sessions/8)")
    p.add_argument("--utterances", type=int, default=None, help="per session (default 20)")
    p.add_argument("--vocab-size", type=int, default=None, help="filler tokens (default 50)")
    p.add_argument("--rho", type=float, default=None,
                   help="train-split probability that the primary role is labelled A (default 0.5)")
    p.add_argument("--p-alt", type=float, default=None, help="speaker alternation probability")
    p.add_argument("--eps", type=float, default=None, help="SAME/DIFF label noise")
    p.add_argument("--marked", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--marker", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--keyed", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("train", help="train one model")
    _hyper(p)
    p.add_argument("--mode", choices=ALL_MODES, default="none")
    p.add_argument("--corpus", required=True, help="directory holding train.txt and dev.txt")
    p.add_argument("--word-vectors", default=None, help="text file: token v1 ... vD")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    for name, func, helptext in (("eval", cmd_eval, "write an evaluation report"),
                                 ("generate", cmd_generate, "decode responses")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--corpus", required=True, help="transcript file or directory with test.txt")
        p.add_argument("--task", choices=TASKS, default=None)
        p.add_argument("--max-len", type=int, default=None)
        p.add_argument("--sif-a", type=float, default=1e-3)
        p.add_argument("--out", default=None)
        p.set_defaults(func=func)

    p = sub.add_parser("compare", help="train every (mode, seed) cell and test against none")
    _hyper(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--modes", default="all", help="comma list or 'all'")
    p.add_argument("--seeds", type=int, default=3, help="runs seeds 0..k-1")
    p.add_argument("--jobs", type=int, default=1, help="cells trained in parallel")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("signif", help="paired significance test on two score files")
    p.add_argument("--test", choices=("mcnemar", "wilcoxon"), required=True)
    p.add_argument("--a", required=True, help="system A scores (0/1 correctness for mcnemar)")
    p.add_argument("--b", required=True)
    p.add_argument("--method", default="auto",
                   help="auto, exact, chi2 (mcnemar) or permutation/normal (wilcoxon)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_signif)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    args.argv = argv
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        print(f"relspeaker {args.command}: error: {e}", file=sys.stderr)
        return 2
    except (TrainingDiverged, RuntimeError, FloatingPointError) as e:
        print(f"relspeaker {args.command}: failed: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        # invalid values surfacing from library code (e.g. a bad --method)
        print(f"relspeaker {args.command}: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
