#!/usr/bin/env python3
"""Dev accuracy as a function of group size k on the synthetic task.

Small k values starve each sequence of contrastive candidates and multiply the
number of gold-free sequences, so accuracy degrades as k shrinks.
"""

import argparse

from fewintent.corpus import sample_few_shot, split_dev
from fewintent.evaluator import generate_synthetic, sweep_k, sweep_table
from fewintent.sequencer import choose_k
from fewintent.trainer import TrainConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--intents", type=int, default=20)
    ap.add_argument("--shots", type=int, default=5)
    ap.add_argument("--noise-tokens", type=int, default=6)
    ap.add_argument("--k-values", type=int, nargs="+", default=[2, 4, 10, 20])
    ap.add_argument("--epochs", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    pool, _ = generate_synthetic(args.intents, 10, args.noise_tokens, seed=args.seed)
    sample = sample_few_shot(pool, args.shots, seed=args.seed)
    train_data, dev_data = split_dev(sample, 0.2, seed=args.seed)

    auto = choose_k(args.intents, 2, args.intents)
    print(f"{args.intents} intents; padding-minimizing k over [2, {args.intents}] is {auto}")
    cfg = TrainConfig(epochs=args.epochs, seed=args.seed)
    rows = sweep_k(train_data, dev_data, cfg, args.k_values)
    print(sweep_table(rows))


if __name__ == "__main__":
    main()
