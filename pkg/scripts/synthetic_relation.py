"""Synthetic relation task: labels depend only on whether the speaker repeats.

Tokens carry no information, so a speaker-blind model sits near the
majority rate while relative encoders should be near perfect.
"""
from _common import base_parser, mean, run_grid

from relspeaker.corpus import RECOG, SynthConfig, gen_synthetic


def main():
    p = base_parser(__doc__.splitlines()[0], epochs=2)
    p.add_argument("--modes", default="none,abs-emb,abs-enc,rel-emb,rel-enc")
    args = p.parse_args()
    splits = gen_synthetic(SynthConfig(marked=False, rho=0.5, eps=0.0))
    _, cells = run_grid(splits, RECOG, args.modes.split(","), args, context=5)
    print("\nmean test accuracy over seeds")
    for mode, cs in cells.items():
        print(f"{mode:8s} {mean(c.test.report.accuracy * 100 for c in cs):.2f}")


if __name__ == "__main__":
    main()
