#!/usr/bin/env python3
"""Generate a planted-rule synthetic corpus as CSV plus vocabulary files.

The winning team's item sets follow a deterministic rule of champion, role,
and enemy composition, so a model that reads team context can be scored
against a known ceiling. Optionally also writes a champion-stratified
train/test split.
"""
import argparse
from pathlib import Path

from ttir.data import (RuleSpec, default_vocabs, save_matches_csv,
                       split_train_test, synthetic_generate)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--n-matches", type=int, default=500)
    parser.add_argument("--n-champ", type=int, default=20)
    parser.add_argument("--n-items", type=int, default=30)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--no-role", action="store_true",
                        help="plant a rule that ignores role")
    parser.add_argument("--no-context", action="store_true",
                        help="plant a rule that ignores the enemy team")
    parser.add_argument("--split", type=float, default=None,
                        help="also write train.csv/test.csv at this train ratio")
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = RuleSpec(use_role=not args.no_role, use_context=not args.no_context)
    matches, _ = synthetic_generate(args.n_matches, args.n_champ, args.n_items,
                                    spec, seed=args.seed)
    champ_vocab, item_vocab = default_vocabs(args.n_champ, args.n_items)
    champ_vocab.save(out / "champions.txt")
    item_vocab.save(out / "items.txt")
    save_matches_csv(matches, out / "matches.csv", champ_vocab, item_vocab)
    print(f"wrote {len(matches)} matches to {out / 'matches.csv'}")

    if args.split is not None:
        dataset = split_train_test(matches, args.split, seed=args.seed)
        save_matches_csv(dataset.train, out / "train.csv", champ_vocab, item_vocab)
        save_matches_csv(dataset.test, out / "test.csv", champ_vocab, item_vocab)
        print(f"split: {len(dataset.train)} train / {len(dataset.test)} test"
              + (f", {len(dataset.unsplittable_champions)} champions train-only"
                 if dataset.unsplittable_champions else ""))


if __name__ == "__main__":
    main()
