"""Command-line entry point: ``sgcn <subcommand> [flags]``.

Exit codes: 0 success, 1 runtime/numeric failure, 2 usage/configuration failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Dict, Optional, Sequence

import numpy as np

from sgcn.checkpoint import load_checkpoint, save_checkpoint
from sgcn.data import (
    EmbeddingStats,
    LabelSet,
    foreign_senses,
    gen_synthetic,
    label_set,
    load_embeddings,
    load_relations,
    write_embeddings,
    write_relations,
)
from sgcn.encoder import OOV_INDEX
from sgcn.errors import ConfigError, DataError, SgcnError
from sgcn.graph import interaction_matrix, write_matrix_csv
from sgcn.model import ModelDims, SgcnModel
from sgcn.training import Task, TrainConfig, evaluate, to_examples, train

logger = logging.getLogger("sgcn")

# Default hyperparameters; everything a run depends on is listed so the echo is complete.
TRAIN_DEFAULTS: Dict[str, object] = {
    "train": None,
    "dev": None,
    "test": None,
    "embeddings": None,
    "emb_dim": None,
    "labels": "pdtb_top4",
    "task": "multi-class",
    "hidden": 128,
    "gcn_size": 100,
    "mlp_hidden": 64,
    "batch": 64,
    "lr": 1e-2,
    "decay": 0.9,
    "clip_lo": -5.0,
    "clip_hi": 5.0,
    "epochs": 30,
    "seed": 1,
    "select_metric": "auto",
    "forget_bias": 1.0,
    "degree_floor": 1.0,
    "lowercase": True,
    "balance_negatives": False,
    "finetune_embeddings": False,
    "checkpoint": "sgcn.ckpt.json",
    "out": None,
}


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    # default=None everywhere: unset flags fall through to config file, then TRAIN_DEFAULTS
    p.add_argument("--config", help="JSON file of flag values (keys use underscores)")
    p.add_argument("--train", help="training relations (JSON lines)")
    p.add_argument("--dev", help="development relations (JSON lines)")
    p.add_argument("--test", help="optional test relations, evaluated after training")
    p.add_argument("--embeddings", help="word-vector text file")
    p.add_argument("--emb-dim", dest="emb_dim", type=int, help="embedding width (default: read from the file)")
    p.add_argument("--labels", help="pdtb_top4 | cdtb_9 | custom:<file>")
    p.add_argument("--task", help="multi-class | one-vs-all:<Class>")
    p.add_argument("--hidden", type=int, help="LSTM hidden width per direction")
    p.add_argument("--gcn-size", dest="gcn_size", type=int)
    p.add_argument("--mlp-hidden", dest="mlp_hidden", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--decay", type=float)
    p.add_argument("--clip-lo", dest="clip_lo", type=float)
    p.add_argument("--clip-hi", dest="clip_hi", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--select-metric", dest="select_metric", choices=["auto", "macro_f1", "accuracy", "positive_f1"])
    p.add_argument("--forget-bias", dest="forget_bias", type=float)
    p.add_argument("--degree-floor", dest="degree_floor", type=float)
    p.add_argument("--no-lowercase", dest="lowercase", action="store_const", const=False)
    p.add_argument("--balance-negatives", dest="balance_negatives", action="store_const", const=True)
    p.add_argument("--finetune-embeddings", dest="finetune_embeddings", action="store_const", const=True)
    p.add_argument("--checkpoint", help="where to write the best checkpoint")
    p.add_argument("--out", help="where to write the tab-separated epoch log")


def resolve(args: argparse.Namespace, defaults: Dict[str, object]) -> Dict[str, object]:
    """defaults < --config file < explicit flags."""
    cfg = dict(defaults)
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                from_file = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}") from exc
        unknown = set(from_file) - set(defaults)
        if unknown:
            raise ConfigError(f"{args.config}: unknown keys {sorted(unknown)}")
        cfg.update(from_file)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def echo_config(cfg: Dict[str, object], out=None) -> None:
    out = out or sys.stdout
    print("# resolved configuration", file=out)
    for key in sorted(cfg):
        print(f"#   {key} = {json.dumps(cfg[key])}", file=out)
    out.flush()


def sniff_dim(path: str) -> int:
    try:
        with open(path, encoding="utf-8", errors="replace") as fh:
            for line in fh:
                parts = line.split()
                if len(parts) > 2:
                    return len(parts) - 1
    except OSError as exc:
        raise ConfigError(f"cannot read embedding file {path}: {exc}") from exc
    raise DataError(f"{path}: could not find any vector line")


def _require(cfg: Dict[str, object], *keys: str) -> None:
    missing = [k for k in keys if not cfg.get(k)]
    if missing:
        raise ConfigError("missing required option(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def finalize(cfg: Dict[str, object]) -> Dict[str, object]:
    """Check required inputs exist and fill values derived from them."""
    _require(cfg, "train", "dev", "embeddings")
    if not Path(str(cfg["embeddings"])).is_file():
        raise ConfigError(f"embedding file not found: {cfg['embeddings']}")
    if cfg["emb_dim"] is None:
        cfg["emb_dim"] = sniff_dim(str(cfg["embeddings"]))
    return cfg


def prepare(cfg: Dict[str, object]):
    """Load everything a training run needs from a finalized config."""
    labels = label_set(str(cfg["labels"]))
    task = Task.parse(str(cfg["task"]))
    classes = task.classes(labels)
    stats = EmbeddingStats()
    table = load_embeddings(
        str(cfg["embeddings"]), int(cfg["emb_dim"]), seed=int(cfg["seed"]), lowercase=bool(cfg["lowercase"]), stats=stats
    )
    train_ex = to_examples(load_relations(str(cfg["train"]), labels), labels, task)
    dev_ex = to_examples(load_relations(str(cfg["dev"]), labels), labels, task)
    dims = ModelDims(
        d_e=int(cfg["emb_dim"]),
        hidden=int(cfg["hidden"]),
        gcn_size=int(cfg["gcn_size"]),
        mlp_hidden=int(cfg["mlp_hidden"]),
        num_classes=len(classes),
        forget_bias=float(cfg["forget_bias"]),
        degree_floor=float(cfg["degree_floor"]),
        finetune_embeddings=bool(cfg["finetune_embeddings"]),
        lowercase=bool(cfg["lowercase"]),
    )
    select = str(cfg["select_metric"])
    if select == "auto" and labels.name == "cdtb_9":
        select = "accuracy"
    tcfg = TrainConfig(
        lr=float(cfg["lr"]),
        decay=float(cfg["decay"]),
        clip_lo=float(cfg["clip_lo"]),
        clip_hi=float(cfg["clip_hi"]),
        batch=int(cfg["batch"]),
        epochs=int(cfg["epochs"]),
        seed=int(cfg["seed"]),
        task=task,
        select_metric=select,
        balance_negatives=bool(cfg["balance_negatives"]),
    )
    tcfg.validate()
    return table, labels, task, classes, train_ex, dev_ex, dims, tcfg


def cmd_train(args: argparse.Namespace) -> int:
    cfg = finalize(resolve(args, TRAIN_DEFAULTS))
    echo_config(cfg)
    table, labels, task, classes, train_ex, dev_ex, dims, tcfg = prepare(cfg)
    model = SgcnModel.init(dims, table, classes, tcfg.seed)
    log_fh = open(cfg["out"], "w") if cfg["out"] else None

    def on_epoch(entry):
        print(entry.line(), flush=True)
        if log_fh:
            log_fh.write(entry.line() + "\n")

    try:
        result = train(model, train_ex, dev_ex, tcfg, on_epoch)
    finally:
        if log_fh:
            log_fh.close()
    save_checkpoint(result.model, str(cfg["checkpoint"]), labels, task)
    print(f"# best epoch {result.best_epoch}; checkpoint written to {cfg['checkpoint']}")
    if cfg["test"]:
        test_ex = to_examples(load_relations(str(cfg["test"]), labels), labels, task)
        print(evaluate(result.model, test_ex, task).format_table())
    return 0


def _load_eval_data(path: str, labels: LabelSet, requested: Optional[str], task: Task):
    if requested is not None:
        other = label_set(requested)
        if other != labels:
            raise ConfigError(f"label set mismatch: checkpoint uses {labels.name}, data declared as {other.name}")
    try:
        records = load_relations(path, labels)
    except DataError as exc:
        if "no records" in str(exc):
            raise ConfigError(f"label set mismatch: {path} has no records labelled in {labels.name}") from exc
        raise
    foreign = foreign_senses(records.skipped_senses, labels)
    if foreign:
        raise ConfigError(f"label set mismatch: checkpoint uses {labels.name} but {path} has senses {foreign}")
    return records, to_examples(records, labels, task)


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = {"checkpoint": args.checkpoint, "test": args.test, "labels": args.labels, "json": args.json}
    _require(cfg, "checkpoint", "test")
    echo_config(cfg)
    model, labels, task = load_checkpoint(args.checkpoint)
    _, examples = _load_eval_data(args.test, labels, args.labels, task)
    report = evaluate(model, examples, task)
    print(report.format_table())
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def cmd_inspect(args: argparse.Namespace) -> int:
    cfg = {"checkpoint": args.checkpoint, "input": args.input, "out": args.out}
    _require(cfg, "checkpoint", "input", "out")
    echo_config(cfg)
    model, labels, task = load_checkpoint(args.checkpoint)
    records = load_relations(args.input, labels)
    if len(records) != 1:
        raise ConfigError(f"{args.input}: inspect expects exactly one record, found {len(records)}")
    rec = records[0]
    table = model.table
    idx = table.indices(rec.arg1_tokens + rec.arg2_tokens)
    oov = sum(i == OOV_INDEX for i in idx) / len(idx)
    out, _ = model.forward(rec.arg1_tokens, rec.arg2_tokens)
    m = out.graph.m
    before = interaction_matrix(out.h1, out.h2)
    after = interaction_matrix(out.x_g.value[:m], out.x_g.value[m:])
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    write_matrix_csv(before, outdir / "M.csv")
    write_matrix_csv(after, outdir / "M_prime.csv")
    print(f"record {rec.id}: m={m} n={out.graph.n} oov_ratio={oov:.4f}")
    for name, mat in (("M", before), ("M'", after)):
        i, j = np.unravel_index(int(np.argmax(mat)), mat.shape)
        print(f"{name:<3} argmax ({i},{j}) = {mat[i, j]:.6f}  ({rec.arg1_tokens[i]}, {rec.arg2_tokens[j]})")
    print(f"prediction: {model.classes[model.predict(rec.arg1_tokens, rec.arg2_tokens)]}  gold: {rec.sense}")
    print(f"wrote {outdir / 'M.csv'} and {outdir / 'M_prime.csv'}")
    return 0


def cmd_gen_synthetic(args: argparse.Namespace) -> int:
    cfg = vars(args).copy()
    cfg.pop("func", None)
    echo_config(cfg)
    total = args.pairs + args.dev_pairs + args.test_pairs
    corpus = gen_synthetic(total, args.vocab, args.classes, args.seed, d_e=args.emb_dim, decoys=args.decoys)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    recs = corpus.records
    splits = {
        "train": recs[: args.pairs],
        "dev": recs[args.pairs: args.pairs + args.dev_pairs],
        "test": recs[args.pairs + args.dev_pairs:],
    }
    for name, part in splits.items():
        if part:
            write_relations(part, outdir / f"{name}.jsonl")
    write_embeddings(corpus.tokens, corpus.vectors, outdir / "embeddings.txt")
    (outdir / "labels.txt").write_text("\n".join(corpus.labels.labels) + "\n")
    (outdir / "triggers.json").write_text(json.dumps(corpus.triggers, indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(recs)} records ({', '.join(f'{k}={len(v)}' for k, v in splits.items())}) to {outdir}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = resolve(args, TRAIN_DEFAULTS)
    try:
        sizes = [int(s) for s in str(args.sizes).split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --sizes {args.sizes!r}") from exc
    if len(sizes) < 2:
        raise ConfigError("sweep needs at least two sizes")
    finalize(cfg)
    echo_config(dict(cfg, sizes=sizes))
    table, labels, task, classes, train_ex, dev_ex, dims, tcfg = prepare(cfg)
    eval_ex = dev_ex
    split = "dev"
    if cfg["test"]:
        eval_ex = to_examples(load_relations(str(cfg["test"]), labels), labels, task)
        split = "test"
    header = f"size\t{split}_accuracy\t{split}_macro_f1\t{split}_positive_f1\tbest_epoch"
    rows = [header]
    print(header, flush=True)
    for size in sizes:
        dims.gcn_size = size
        model = SgcnModel.init(dims, table, classes, tcfg.seed)
        result = train(model, train_ex, dev_ex, tcfg)
        rep = evaluate(result.model, eval_ex, task)
        row = "\t".join([f"{size}d", f"{rep.accuracy:.6f}", f"{rep.macro_f1:.6f}", f"{rep.positive_f1:.6f}", str(result.best_epoch)])
        rows.append(row)
        print(row, flush=True)
    if cfg["out"]:
        Path(str(cfg["out"])).write_text("\n".join(rows) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sgcn", description="Semantic graph convolutional network for discourse relations")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write its best checkpoint")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a checkpoint on a relation file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--labels", help="declared label set of the data; must match the checkpoint")
    p.add_argument("--json", help="also write the report as JSON to this path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("inspect-interactions", help="export pre/post-GCN interaction matrices for one record")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", "--test", dest="input", required=True, help="relation file holding exactly one record")
    p.add_argument("--out", required=True, help="output directory for M.csv and M_prime.csv")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("gen-synthetic", help="write a planted trigger-pair corpus and matching embeddings")
    p.add_argument("--pairs", type=int, default=2000, help="training pairs")
    p.add_argument("--dev-pairs", type=int, default=400)
    p.add_argument("--test-pairs", type=int, default=0)
    p.add_argument("--vocab", type=int, default=200)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--emb-dim", type=int, default=32)
    p.add_argument("--decoys", type=int, default=1)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("sweep-gcn-size", help="train one model per GCN width and tabulate the metrics")
    _add_train_flags(p)
    p.add_argument("--sizes", default="50,100,150,200")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SgcnError as exc:
        print(f"sgcn {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"sgcn {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
