"""Summarise the EWA benchmark: one-shot distribution, k-level view and repeated self-play.

    python3 scripts/ewa_report.py [--rounds 30] [--seed 0] [--denominator-plus-one]
"""
import argparse

import numpy as np

from guessbench.ewa import EwaParams, one_shot_distribution, poisson_ch_levels, self_play
from guessbench.game import GameSpec
from guessbench.stats import to_k_level


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--rounds", type=int, default=30)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--denominator-plus-one", action="store_true")
    ap.add_argument("--level0", choices=["uniform", "point"], default="uniform")
    args = ap.parse_args()

    spec = GameSpec()
    params = EwaParams(level0=args.level0, denominator_plus_one=args.denominator_plus_one)
    ch = poisson_ch_levels(params, spec)
    print("cognitive-hierarchy opponent mix")
    for k, (w, g) in enumerate(zip(ch.weights, ch.guesses)):
        print(f"  level {k:2d}: weight {w:.4f}  guess {g}")

    probs = one_shot_distribution(spec, params)
    mean = float(probs @ spec.actions)
    sd = float(np.sqrt(probs @ (spec.actions - mean) ** 2))
    top = np.argsort(probs)[::-1][:8]
    print(f"\none-shot distribution: mean {mean:.2f}, sd {sd:.2f}, P(0) {probs[0]:.4f}, "
          f"k-level of mean {to_k_level(mean):.2f}")
    print("  most likely guesses: " + ", ".join(f"{spec.low + i} ({probs[i]:.3f})" for i in top))

    plays, states = self_play(spec, params, args.rounds, np.random.default_rng(args.seed))
    print(f"\nself-play over {args.rounds} rounds (seed {args.seed})")
    for t, (a, b) in enumerate(plays, 1):
        print(f"  round {t:3d}: {a:3d} vs {b:3d}")
    print(f"final experience weight {states[0].n:.3f}, phi {states[0].phi:.3f}")


if __name__ == "__main__":
    main()
