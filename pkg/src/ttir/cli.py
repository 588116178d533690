"""Command-line entry points: train, eval, serve.

The optional config file is flat TOML whose keys mirror the model and
training dataclasses; vocabulary sizes always come from the vocabulary files
themselves.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .data import Vocab, load_matches
from .metrics import evaluate_model, model_recommender, paired_t_test
from .model import TTIRConfig
from .train import TrainConfig, fit, load_checkpoint

_MODEL_KEYS = {f.name for f in dataclasses.fields(TTIRConfig)} - {"n_champions", "n_items"}
_TRAIN_KEYS = {f.name for f in dataclasses.fields(TrainConfig)}


def _read_config(path: str | None) -> tuple[dict, dict]:
    if path is None:
        return {}, {}
    raw = tomllib.loads(Path(path).read_text(encoding="utf-8"))
    model_kw, train_kw = {}, {}
    for key, value in raw.items():
        if key in _MODEL_KEYS:
            model_kw[key] = value
        elif key in _TRAIN_KEYS:
            train_kw[key] = value
        elif key in ("n_champions", "n_items"):
            raise SystemExit(f"config: {key} is derived from the vocabulary files, "
                             "remove it")
        else:
            raise SystemExit(f"config: unknown key {key!r}")
    return model_kw, train_kw


def _load_corpus(args) -> tuple[list, Vocab, Vocab]:
    champ_vocab = Vocab.load(args.champ_vocab)
    item_vocab = Vocab.load(args.item_vocab)
    result = load_matches(args.data, champ_vocab, item_vocab)
    print(f"loaded {len(result.matches)} matches "
          f"({result.rejected_matches} rejected, {result.malformed_rows} malformed rows, "
          f"{result.dropped_items} items dropped)")
    return result.matches, champ_vocab, item_vocab


def _cmd_train(args) -> int:
    matches, champ_vocab, item_vocab = _load_corpus(args)
    model_kw, train_kw = _read_config(args.config)
    if args.seed is not None:
        train_kw["seed"] = args.seed
    train_kw.setdefault("max_epochs", 50)
    model_config = TTIRConfig(n_champions=len(champ_vocab), n_items=len(item_vocab),
                              **model_kw)
    train_config = TrainConfig(**train_kw)
    model, report = fit(matches, train_config, model_config,
                        checkpoint_dir=args.out, champion_vocab=champ_vocab,
                        item_vocab=item_vocab)
    for epoch, (loss, recall) in enumerate(zip(report.train_losses, report.val_recalls)):
        marker = " *" if epoch == report.best_epoch else ""
        print(f"epoch {epoch:3d}  loss {loss:.4f}  val-recall@6 {recall:.4f}{marker}")
    print(f"best epoch {report.best_epoch} "
          f"(val recall@6 {report.best_val_recall:.4f})")
    print(f"checkpoint written to {report.checkpoint_path}")
    return 0


def _cmd_eval(args) -> int:
    matches, champ_vocab, item_vocab = _load_corpus(args)
    payload = {"data": str(args.data), "n_matches": len(matches), "reports": []}
    reports = []
    for ckpt in args.ckpt:
        model = load_checkpoint(ckpt, champ_vocab, item_vocab)
        report = evaluate_model(model_recommender(model), matches)
        reports.append(report)
        payload["reports"].append({"checkpoint": str(ckpt),
                                   "report": report.to_dict()})
        print(f"{ckpt}:")
        for metric in ("precision", "recall", "f1", "map"):
            values = "  ".join(f"@{k}={report.mean(metric, k):.4f}"
                               for k in report.ks)
            print(f"  {metric:9s} {values}")
        print(f"  slots evaluated {report.n_slots}, excluded {report.n_excluded}")
    if len(reports) == 2:
        a = reports[0].slot_values(args.t_test_metric, args.t_test_k)
        b = reports[1].slot_values(args.t_test_metric, args.t_test_k)
        result = paired_t_test(a, b)
        payload["t_test"] = {"metric": args.t_test_metric, "k": args.t_test_k,
                             "t": result.t, "df": result.df, "p": result.p,
                             "degenerate": result.degenerate}
        print(f"paired t-test on {args.t_test_metric}@{args.t_test_k}: "
              f"t={result.t:.4f} df={result.df} p={result.p:.4g}")
    if args.report:
        Path(args.report).write_text(json.dumps(payload, indent=2) + "\n",
                                     encoding="utf-8")
        print(f"report written to {args.report}")
    return 0


def _cmd_serve(args) -> int:
    from .serve import run_server
    run_server(args.ckpt, args.champ_vocab, args.item_vocab,
               host=args.host, port=args.port)
    return 0


def _add_data_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", required=True, help="flattened matches CSV")
    parser.add_argument("--champ-vocab", required=True,
                        help="champion names, one per line")
    parser.add_argument("--item-vocab", required=True,
                        help="item names, one per line")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ttir",
                                     description="team-aware Transformer item recommender")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model and write a checkpoint")
    _add_data_args(p_train)
    p_train.add_argument("--config", help="flat TOML config file")
    p_train.add_argument("--out", required=True, help="checkpoint output directory")
    p_train.add_argument("--seed", type=int, help="overrides the config seed")
    p_train.set_defaults(func=_cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate checkpoints on a test corpus")
    _add_data_args(p_eval)
    p_eval.add_argument("--ckpt", action="append", required=True,
                        help="checkpoint path; pass twice for a paired t-test")
    p_eval.add_argument("--report", help="write the JSON report here")
    p_eval.add_argument("--t-test-metric", default="map",
                        choices=["precision", "recall", "f1", "map"],
                        help="per-slot metric to pair when two checkpoints are given")
    p_eval.add_argument("--t-test-k", type=int, default=6)
    p_eval.set_defaults(func=_cmd_eval)

    p_serve = sub.add_parser("serve", help="serve a checkpoint over HTTP")
    p_serve.add_argument("--ckpt", required=True)
    p_serve.add_argument("--champ-vocab", required=True)
    p_serve.add_argument("--item-vocab", required=True)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8100)
    p_serve.set_defaults(func=_cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
