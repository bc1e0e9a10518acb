"""Command-line surface: corpus generation, training, evaluation, ablation
sweeps, and static SVG reports.

Every command writes resolved-config.txt into its output directory; that
file reproduces the run bit-identically. Usage errors exit 2, data errors
exit 1.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import sys
from pathlib import Path

from . import config as cfgmod
from . import svg
from .config import ConfigError
from .corpus import StoreFormatError, load_corpus, load_embedding_store, write_corpus, write_embedding_store
from .metrics import UndefinedMetricError, count_bridge_mentions
from .rltrain import (
    MissingEmbeddingError,
    evaluate,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .synth import ConfigError as SynthConfigError
from .synth import generate_synthetic

SWEEP_ALIASES = {"lambda": "lambda_positive"}


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("config overrides")
    for key in cfgmod.DEFAULTS:
        group.add_argument(f"--{key.replace('_', '-')}", dest=key, metavar="V")


def _flag_values(args) -> dict:
    return {
        key: getattr(args, key)
        for key in cfgmod.DEFAULTS
        if getattr(args, key, None) is not None
    }


def _resolve(args) -> dict:
    file_values = cfgmod.load_config_file(args.config) if getattr(args, "config", None) else None
    return cfgmod.resolve(file_values, _flag_values(args))


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _load_corpus_dir(corpus_dir: str):
    root = Path(corpus_dir)
    corpus = load_corpus(root / "corpus.json")
    store = load_embedding_store(root / "embeddings.bin")
    return corpus, store


def cmd_gen_corpus(args) -> int:
    cfg = _resolve(args)
    corpus, store = generate_synthetic(cfgmod.to_synthetic_config(cfg))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_corpus(corpus, out / "corpus.json")
    write_embedding_store(store, out / "embeddings.bin")
    _write(out / "resolved-config.txt", cfgmod.resolved_text(cfg))
    print(f"wrote {len(corpus.bags)} bags, {len(corpus.documents)} documents, "
          f"{len(store)} embedding entries to {out}")
    return 0


def _metrics_csv(metrics: dict, ks) -> str:
    cols = ["auc", "f1"] + [f"p_at_{k}" for k in ks] + [
        "evidence_recall", "mean_bridge_mentions_pos", "mean_bridge_mentions_na"]
    return (",".join(cols) + "\n"
            + ",".join(repr(float(metrics[c])) for c in cols) + "\n")


def _stats_csv(records, corpus) -> str:
    lines = ["bag,path,side,bag_relation,bag_is_na,path_is_na,n_selected,"
             "bridge_mentions,evidence_hits,evidence_total"]
    for rec in records:
        bag = corpus.bags[rec.bag_id]
        path = bag.paths[rec.path_id]
        doc = path.head_doc if rec.side == "head" else path.tail_doc
        mentions = count_bridge_mentions(doc, rec.selected, path.bridge_entities)
        labels = bag.path_oracle_labels
        path_is_na = (not labels[rec.path_id]) if labels is not None else False
        relation = "" if bag.relation is None else bag.relation
        lines.append(
            f"{rec.bag_id},{rec.path_id},{rec.side},{relation},"
            f"{int(bag.is_na)},{int(path_is_na)},{len(rec.selected)},"
            f"{mentions},{rec.evidence_hits},{rec.evidence_total}")
    return "\n".join(lines) + "\n"


def cmd_train(args) -> int:
    cfg = _resolve(args)
    corpus, store = _load_corpus_dir(args.corpus)
    tcfg = cfgmod.to_train_config(cfg)
    rcfg = cfgmod.to_reward_config(cfg)
    policy, head, history = train(corpus, store, tcfg, rcfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    resolved = cfgmod.resolved_text(cfg)
    save_checkpoint(out / "checkpoint.bin", policy, head, resolved)
    _write(out / "history.csv", history.to_csv())
    _write(out / "resolved-config.txt", resolved)
    final = history.reward_ema[-1] if history.reward_ema else float("nan")
    print(f"trained {tcfg.epochs} epochs ({len(history.steps)} steps), "
          f"final reward ema {final:.4f}; wrote {out}")
    return 0


def cmd_eval(args) -> int:
    policy, head, cfg_text = load_checkpoint(Path(args.model) / "checkpoint.bin")
    cfg = cfgmod.resolve(cfgmod.parse_config_text(cfg_text), _flag_values(args))
    corpus, store = _load_corpus_dir(args.corpus)
    tcfg = cfgmod.to_train_config(cfg)
    ks = cfgmod.p_at_ks(cfg)
    metrics, records = evaluate(policy, head, corpus, store, tcfg, ks)
    out = Path(args.out) if args.out else Path(args.model)
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "metrics.csv", _metrics_csv(metrics, ks))
    _write(out / "selection-stats.csv", _stats_csv(records, corpus))
    _write(out / "resolved-config.txt", cfgmod.resolved_text(cfg))
    print(", ".join(f"{k}={v:.4f}" for k, v in metrics.items()))
    return 0


def _parse_sweeps(entries) -> list[tuple[str, list[str]]]:
    sweeps = []
    for entry in entries:
        if "=" not in entry:
            raise ConfigError(f"bad sweep argument {entry!r}, expected key=v1,v2,...")
        key, values = entry.split("=", 1)
        key = SWEEP_ALIASES.get(key.strip(), key.strip())
        if key not in cfgmod.DEFAULTS:
            raise ConfigError(f"unknown sweep key {key!r}")
        parsed = [v.strip() for v in values.split(",") if v.strip()]
        if not parsed:
            raise ConfigError(f"sweep {key!r} has no values")
        sweeps.append((key, parsed))
    return sweeps


def cmd_ablate(args) -> int:
    base = _resolve(args)
    sweeps = _parse_sweeps(args.sweep)
    corpus, store = _load_corpus_dir(args.corpus)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    swept_keys = [key for key, _ in sweeps]
    rows = []
    for combo in itertools.product(*(vals for _, vals in sweeps)):
        cfg = cfgmod.resolve(
            {k: v for k, v in base.items() if k in cfgmod.DEFAULTS},
            dict(zip(swept_keys, combo)),
        )
        cell = "-".join(f"{k}={v}" for k, v in zip(swept_keys, combo))
        tcfg = cfgmod.to_train_config(cfg)
        rcfg = cfgmod.to_reward_config(cfg)
        policy, head, history = train(corpus, store, tcfg, rcfg)
        metrics, _ = evaluate(policy, head, corpus, store, tcfg, cfgmod.p_at_ks(cfg))
        cell_dir = out / cell.replace("=", "_")
        cell_dir.mkdir(parents=True, exist_ok=True)
        _write(cell_dir / "history.csv", history.to_csv())
        _write(cell_dir / "resolved-config.txt", cfgmod.resolved_text(cfg))
        rows.append(list(combo) + [metrics[c] for c in _METRIC_COLS])
        print(f"{cell}: f1={metrics['f1']:.4f} auc={metrics['auc']:.4f}")
    header = swept_keys + _METRIC_COLS
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(
            v if isinstance(v, str) else repr(float(v)) for v in row))
    _write(out / "results.csv", "\n".join(lines) + "\n")
    _write(out / "resolved-config.txt", cfgmod.resolved_text(base))
    return 0


_METRIC_COLS = ["auc", "f1", "p_at_50", "p_at_100", "evidence_recall",
                "mean_bridge_mentions_pos", "mean_bridge_mentions_na"]


def _read_csv(path) -> tuple[list[str], list[dict]]:
    with open(path, encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return list(reader.fieldnames or []), list(reader)


def _report_history(stem: str, rows, out: Path) -> None:
    steps = [float(r["step"]) for r in rows]
    series = [
        ("reward", steps, [float(r["reward"]) for r in rows]),
        ("reward ema", steps, [float(r["reward_ema"]) for r in rows]),
    ]
    _write(out / f"{stem}-reward.svg",
           svg.line_plot(series, "Selection reward during training", "step", "reward"))


def _report_stats(stem: str, rows, out: Path) -> None:
    hist_pos: dict[int, int] = {}
    hist_na: dict[int, int] = {}
    for r in rows:
        if r["bag_is_na"] == "1":
            continue
        hist = hist_na if r["path_is_na"] == "1" else hist_pos
        count = int(r["bridge_mentions"])
        hist[count] = hist.get(count, 0) + 1
    groups = [("positive paths", hist_pos), ("no-relation paths", hist_na)]
    groups = [(label, h) for label, h in groups if h]
    _write(out / f"{stem}-bridge-hist.svg",
           svg.bar_hist(groups, "Bridge-entity mentions in selected sentences",
                        "bridge mentions per selection", "selections"))


def _report_ablation(stem: str, header, rows, out: Path) -> None:
    swept = [c for c in header if c not in _METRIC_COLS]
    if len(swept) != 1:
        swept = swept[:1]
    key = swept[0]
    values = [r[key] for r in rows]
    f1s = [float(r["f1"]) for r in rows]
    try:
        xs = [float(v) for v in values]
        order = sorted(range(len(xs)), key=lambda i: xs[i])
        plot = svg.line_plot(
            [("best F1", [xs[i] for i in order], [f1s[i] for i in order])],
            f"Best F1 by {key}", key, "best F1")
    except ValueError:
        plot = svg.bar_hist([("best F1", dict(zip(values, f1s)))],
                            f"Best F1 by {key}", key, "best F1")
    _write(out / f"{stem}-f1-vs-{key}.svg", plot)


def cmd_report(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for path in args.inputs:
        header, rows = _read_csv(path)
        stem = Path(path).stem
        if not rows:
            print(f"skipping empty csv {path}", file=sys.stderr)
            continue
        if header[:3] == ["step", "reward", "reward_ema"]:
            _report_history(stem, rows, out)
        elif "bridge_mentions" in header:
            _report_stats(stem, rows, out)
        elif "f1" in header:
            _report_ablation(stem, header, rows, out)
        else:
            print(f"unrecognized csv layout in {path}", file=sys.stderr)
            return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reic",
        description="Evidence-sentence selection experiments: corpus generation, "
                    "joint selector+scorer training, evaluation, and reports.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-corpus", help="generate a synthetic planted-evidence corpus")
    p.add_argument("--config", help="config file of key = value lines")
    p.add_argument("--out", required=True, help="output directory")
    _add_config_flags(p)
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("train", help="train the selector and scoring head")
    p.add_argument("--config")
    p.add_argument("--corpus", required=True, help="directory from gen-corpus")
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained model on a corpus")
    p.add_argument("--model", required=True, help="directory with checkpoint.bin")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", help="output directory (default: model dir)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="run a sweep grid and write a combined CSV")
    p.add_argument("--config")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--sweep", action="append", required=True,
                   metavar="KEY=V1,V2", help="repeat for a grid")
    _add_config_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("report", help="emit SVG plots from result CSVs")
    p.add_argument("--in", dest="inputs", nargs="+", required=True, metavar="CSV")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (SynthConfigError, StoreFormatError, MissingEmbeddingError,
            UndefinedMetricError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
