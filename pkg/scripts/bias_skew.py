"""Bias skew: train with the primary role mostly on A, test with it balanced.

Absolute speaker models learn "A does X", which stops holding at test
time; relative models only see own/other and should transfer.
"""
from _common import base_parser, mean, run_grid

from relspeaker.corpus import MARKED, RECOG, SynthConfig, gen_synthetic


def main():
    p = base_parser(__doc__.splitlines()[0], epochs=3)
    p.add_argument("--rho", type=float, default=0.9)
    p.add_argument("--modes", default="none,abs-emb,abs-enc,rel-emb,rel-enc")
    args = p.parse_args()
    splits = gen_synthetic(SynthConfig(marked=True, marker=False, rho=args.rho))
    ds, cells = run_grid(splits, RECOG, args.modes.split(","), args, eval_train=True, context=5)
    marked = ds.labels.index(MARKED)
    print("\nmode      train   test    drop   MARKED-delta")
    for mode, cs in cells.items():
        tr = mean(c.train.report.accuracy * 100 for c in cs)
        te = mean(c.test.report.accuracy * 100 for c in cs)
        deltas = [c.test.per_class_speaker[marked].delta for c in cs
                  if marked in c.test.per_class_speaker]
        d = f"{mean(deltas):.2f}" if deltas else "n/a"
        print(f"{mode:8s} {tr:6.2f} {te:6.2f} {tr - te:6.2f}   {d}")


if __name__ == "__main__":
    main()
