"""Relation-keyed generation: the response phrase depends on whether the responder just spoke."""
from _common import base_parser, mean, run_grid

from relspeaker.corpus import GEN, SynthConfig, gen_synthetic


def main():
    p = base_parser(__doc__, epochs=2)
    p.add_argument("--sessions", type=int, default=1000)
    p.add_argument("--modes", default="none,rel-enc")
    args = p.parse_args()
    splits = gen_synthetic(SynthConfig(n_train=args.sessions, n_dev=100, n_test=100,
                                       utterances=10, keyed=True))
    _, cells = run_grid(splits, GEN, args.modes.split(","), args, context=4)
    print("\nmean over seeds: bleu1 sif distinct1")
    for mode, cs in cells.items():
        print(f"{mode:8s} {mean(c.test.report.bleu1 for c in cs):.2f} "
              f"{mean(c.test.report.sif for c in cs):.2f} "
              f"{mean(c.test.report.distinct1 for c in cs):.0f}")


if __name__ == "__main__":
    main()
