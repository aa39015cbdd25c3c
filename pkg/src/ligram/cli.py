"""Command-line surface.

Subcommands: validate, build-graphs, train, evaluate, ablate, synth,
gradcheck. Every command takes ``--config PATH`` (flat JSON) plus flag
overrides (later wins), exits nonzero with a one-line diagnostic on any
error, and draws all randomness from ``--seed``. Diagnostics go to stderr,
data to stdout; set ``LIGRAM_LOG`` to adjust verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from . import corpus as corpus_mod
from . import graphs as graphs_mod
from . import training
from .config import RunConfig, load_config_file, resolve_config
from .embeddings import EmbeddingTable, read_embedding_table, write_embedding_table
from .errors import ConfigError, LigramError
from .synthetic import SyntheticSpec, generate_synthetic_corpus

log = logging.getLogger("ligram")

_CONFIG_FLAGS = [
    ("--corpus", "corpus", str, "corpus JSONL file"),
    ("--morpheme-emb", "morpheme_emb", str, "morpheme embedding file"),
    ("--entity-emb", "entity_emb", str, "entity embedding file"),
    ("--out", "out", str, "output directory"),
    ("--seed", "seed", int, "RNG seed"),
    ("--hidden", "hidden", int, "hidden width of every GCN layer"),
    ("--window", "window", int, "PMI sliding-window width"),
    ("--delta", "doc_threshold", float, "document-edge dot-product threshold"),
    ("--dropout", "dropout", float, "input-feature dropout rate"),
    ("--lambda", "contrastive_weight", float, "contrastive loss weight"),
    ("--lr", "lr", float, "learning rate"),
    ("--weight-decay", "weight_decay", float, "decoupled weight decay"),
    ("--max-epochs", "max_epochs", int, "training epoch budget"),
    ("--eval-every", "eval_every", int, "validation cadence in epochs"),
    ("--temperature", "temperature", float, "contrastive similarity temperature"),
    ("--entity-min-sim", "entity_min_sim", float, "entity-edge cosine threshold"),
    ("--min-freq", "min_freq", int, "morpheme frequency cutoff"),
    ("--split-per-class", "split_per_class", int, "labeled documents sampled per class"),
    ("--grad-clip", "grad_clip", float, "global gradient-norm clip (off by default)"),
    ("--embedding-dim", "embedding_dim", int, "expected morpheme embedding dim"),
]


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, default=None, help="flat JSON config file")
    for flag, dest, ftype, help_text in _CONFIG_FLAGS:
        parser.add_argument(flag, dest=dest, type=ftype, default=None, help=help_text)
    for kind in ("morpheme", "pos", "entity"):
        parser.add_argument(
            f"--no-{kind}",
            dest=f"use_{kind}",
            action="store_const",
            const=False,
            default=None,
            help=f"disable the {kind} subgraph",
        )
    parser.add_argument(
        "--no-semcon",
        dest="use_semcon",
        action="store_const",
        const=False,
        default=None,
        help="disable contrastive training",
    )
    parser.add_argument(
        "--contrastive-scope",
        dest="contrastive_scope",
        choices=("all", "labeled"),
        default=None,
        help="documents participating in contrastive pairs",
    )
    parser.add_argument(
        "--missing-embedding",
        dest="missing_embedding",
        choices=("error", "zero-vector"),
        default=None,
        help="policy for vocabulary morphemes without an embedding row",
    )


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    file_values = load_config_file(args.config) if args.config else None
    override_names = [dest for _, dest, _, _ in _CONFIG_FLAGS] + [
        "use_morpheme",
        "use_pos",
        "use_entity",
        "use_semcon",
        "contrastive_scope",
        "missing_embedding",
    ]
    overrides = {name: getattr(args, name, None) for name in override_names}
    return resolve_config(file_values, overrides)


def _preprocess(config: RunConfig, raw: corpus_mod.Corpus) -> corpus_mod.Corpus:
    corpus = corpus_mod.deduplicate(raw)
    corpus = corpus_mod.filter_low_frequency(corpus, config.min_freq)
    corpus = corpus_mod.build_vocabularies(corpus)
    if any(d.split is None for d in corpus.documents):
        corpus = corpus_mod.assign_splits(corpus, config.split_per_class, config.seed)
    return corpus


def _load_tables(
    config: RunConfig,
) -> tuple[EmbeddingTable | None, EmbeddingTable | None]:
    morpheme_table = None
    entity_table = None
    if config.morpheme_emb:
        morpheme_table = read_embedding_table(config.morpheme_emb)
        if config.embedding_dim is not None and morpheme_table.dim != config.embedding_dim:
            raise ConfigError(
                f"{config.morpheme_emb}: embedding dim {morpheme_table.dim} does not "
                f"match configured dim {config.embedding_dim}"
            )
    if config.entity_emb:
        entity_table = read_embedding_table(config.entity_emb)
    return morpheme_table, entity_table


def _pipeline(config: RunConfig):
    if not config.corpus:
        raise ConfigError("a corpus path is required (--corpus or config key)")
    corpus = _preprocess(config, corpus_mod.load_corpus(config.corpus))
    morpheme_table, entity_table = _load_tables(config)
    bundle = graphs_mod.build_graph_bundle(
        corpus,
        morpheme_table,
        entity_table,
        window=config.window,
        entity_min_sim=config.entity_min_sim,
        missing=config.missing_embedding,
        kinds=config.enabled_kinds,
    )
    return corpus, bundle


def _input_dims(bundle: graphs_mod.GraphBundle, kinds) -> dict[str, int]:
    return {kind: bundle.subgraphs[kind].feature_dim for kind in kinds}


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Commands.


def cmd_validate(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    if not config.corpus:
        raise ConfigError("a corpus path is required (--corpus or config key)")
    raw = corpus_mod.load_corpus(config.corpus)
    lengths = [len(d.morphemes) for d in raw.documents]
    avg_length = float(np.mean(lengths)) if lengths else 0.0
    processed = _preprocess(config, raw)
    print(f"{'texts':<12} {len(raw.documents)}")
    print(f"{'avg length':<12} {avg_length:.1f}")
    print(f"{'classes':<12} {processed.n_classes}")
    print(f"{'morphemes':<12} {len(processed.morpheme_vocab)}")
    print(f"{'entities':<12} {len(processed.entity_vocab)}")
    print(f"{'pos tags':<12} {len(processed.pos_vocab)}")
    morpheme_table, entity_table = _load_tables(config)
    problems = []
    if morpheme_table is not None:
        missing = [m for m in processed.morpheme_vocab if m not in morpheme_table]
        if missing and config.missing_embedding == "error":
            problems.append(
                f"{config.morpheme_emb}: {len(missing)} vocabulary morphemes have no "
                f"embedding row (first: {missing[0]!r})"
            )
        elif missing:
            log.warning("%d morphemes missing from %s", len(missing), config.morpheme_emb)
        print(f"{'morph emb':<12} dim {morpheme_table.dim}, {len(morpheme_table)} rows")
    if entity_table is not None:
        missing = [e for e in processed.entity_vocab if e not in entity_table]
        if missing:
            problems.append(
                f"{config.entity_emb}: {len(missing)} vocabulary entities have no "
                f"embedding row (first: {missing[0]!r})"
            )
        print(f"{'entity emb':<12} dim {entity_table.dim}, {len(entity_table)} rows")
    if problems:
        for problem in problems:
            print(f"error: {problem}", file=sys.stderr)
        return 1
    return 0


def cmd_build_graphs(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    corpus, bundle = _pipeline(config)
    out_dir = Path(config.out) / "graphs"
    graphs_mod.save_bundle(bundle, out_dir)
    stats = graphs_mod.graph_stats(bundle, config.hidden)
    _write_json(out_dir / "stats.json", stats.to_dict())
    print(stats.format_table())
    log.info("graph bundle written to %s", out_dir)
    return 0


def _train_once(config: RunConfig):
    corpus, bundle = _pipeline(config)
    run = training.train(corpus, bundle, config)
    return corpus, bundle, run


def cmd_train(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    corpus, bundle, run = _train_once(config)
    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt.save_checkpoint(
        out_dir / "checkpoint.lgck",
        run.params,
        config,
        corpus.class_names,
        _input_dims(bundle, run.params.kinds),
        run.best_epoch,
        run.best_val_accuracy,
    )
    _write_json(out_dir / "history.json", run.history_dict())
    summary = {
        "best_epoch": run.best_epoch,
        "val_accuracy": run.best_val_accuracy,
        "val_macro_f1": run.best_val_macro_f1,
    }
    if corpus.split_indices("test").size:
        test_report = training.evaluate(
            run.params, bundle, corpus, "test", config.hyper(), epoch=run.best_epoch
        )
        _write_json(out_dir / "metrics_test.json", test_report.to_dict())
        summary["test_accuracy"] = test_report.accuracy
        summary["test_macro_f1"] = test_report.macro_f1
    print(json.dumps(summary, indent=2))
    log.info("checkpoint and history written to %s", out_dir)
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    loaded = ckpt.load_checkpoint(args.checkpoint)
    config = loaded.config
    for key in ("corpus", "morpheme_emb", "entity_emb", "out"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(config, key, value)
    corpus, bundle = _pipeline(config)
    if corpus.class_names != loaded.class_names:
        raise ConfigError(
            "corpus class names do not match the checkpoint "
            f"({corpus.class_names} vs {loaded.class_names})"
        )
    params = loaded.to_parameters()
    report = training.evaluate(
        params, bundle, corpus, args.split, config.hyper(), epoch=loaded.epoch
    )
    print(report.to_json())
    _write_json(Path(config.out) / f"metrics_{args.split}.json", report.to_dict())
    return 0


_ABLATION_GRID = [
    ("morpheme", "morpheme", dict(use_morpheme=True, use_pos=False, use_entity=False)),
    ("pos", "pos", dict(use_morpheme=False, use_pos=True, use_entity=False)),
    ("entity", "entity", dict(use_morpheme=False, use_pos=False, use_entity=True)),
    ("morpheme/pos", "morpheme_pos", dict(use_morpheme=True, use_pos=True, use_entity=False)),
    (
        "morpheme/entity",
        "morpheme_entity",
        dict(use_morpheme=True, use_pos=False, use_entity=True),
    ),
    ("pos/entity", "pos_entity", dict(use_morpheme=False, use_pos=True, use_entity=True)),
    (
        "w/o SemCon",
        "wo_semcon",
        dict(use_morpheme=True, use_pos=True, use_entity=True, use_semcon=False),
    ),
    ("full", "full", dict(use_morpheme=True, use_pos=True, use_entity=True, use_semcon=True)),
]


def cmd_ablate(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    seeds = config.ablate_seeds or [config.seed]
    out_dir = Path(config.out) / "ablate"
    results = []
    for label, slug, overrides in _ABLATION_GRID:
        acc_values, f1_values = [], []
        for seed in seeds:
            run_config = RunConfig.from_dict({**config.to_dict(), **overrides, "seed": seed})
            run_config.validate()
            corpus, bundle, run = _train_once(run_config)
            split = "test" if corpus.split_indices("test").size else "val"
            report = training.evaluate(
                run.params, bundle, corpus, split, run_config.hyper(), epoch=run.best_epoch
            )
            acc_values.append(report.accuracy)
            f1_values.append(report.macro_f1)
            run_dir = out_dir / slug / f"seed_{seed}"
            ckpt.save_checkpoint(
                run_dir / "checkpoint.lgck",
                run.params,
                run_config,
                corpus.class_names,
                _input_dims(bundle, run.params.kinds),
                run.best_epoch,
                run.best_val_accuracy,
            )
            _write_json(run_dir / "metrics.json", report.to_dict())
            log.info("ablation %s seed %d: acc=%.4f f1=%.4f", label, seed, report.accuracy,
                     report.macro_f1)
        results.append(
            {
                "model": label,
                "accuracy": float(np.mean(acc_values)),
                "macro_f1": float(np.mean(f1_values)),
                "seeds": list(seeds),
            }
        )
    _write_json(out_dir / "ablation.json", {"results": results})
    lines = ["| Model | ACC | F1 |", "| --- | --- | --- |"]
    for row in results:
        lines.append(f"| {row['model']} | {row['accuracy']:.4f} | {row['macro_f1']:.4f} |")
    table = "\n".join(lines)
    (out_dir / "ablation.md").write_text(table + "\n", encoding="utf-8")
    print(table)
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    spec = SyntheticSpec(
        n_classes=args.classes,
        docs_per_class=args.docs_per_class,
        vocab_per_class=args.vocab_per_class,
        overlap=args.overlap,
        shared_vocab=args.shared_vocab,
        doc_len_min=args.doc_len_min,
        doc_len_max=args.doc_len_max,
        entities_per_class=args.entities_per_class,
        entities_per_doc=args.entities_per_doc,
        entity_density=args.entity_density,
        embedding_dim=args.dim,
        embedding_noise=args.noise,
    )
    seed = args.seed if args.seed is not None else 0
    corpus, morpheme_table, entity_table = generate_synthetic_corpus(spec, seed)
    out_dir = Path(args.out if args.out is not None else "ligram_out")
    out_dir.mkdir(parents=True, exist_ok=True)
    corpus_mod.save_corpus(corpus, out_dir / "corpus.jsonl")
    write_embedding_table(morpheme_table, out_dir / "morpheme_embeddings.lgem")
    write_embedding_table(entity_table, out_dir / "entity_embeddings.lgem")
    for name in (
        "corpus.jsonl",
        "morpheme_embeddings.lgem",
        "morpheme_embeddings.lgem.tokens",
        "entity_embeddings.lgem",
        "entity_embeddings.lgem.tokens",
    ):
        print(out_dir / name)
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    micro = RunConfig.from_dict(
        {
            **config.to_dict(),
            "hidden": 6,
            "dropout": 0.0,
            "corpus": None,
            "morpheme_emb": None,
            "entity_emb": None,
            "min_freq": 1,
        }
    )
    micro.validate()
    spec = SyntheticSpec(
        n_classes=3,
        docs_per_class=4,
        vocab_per_class=6,
        overlap=0.2,
        shared_vocab=4,
        doc_len_min=3,
        doc_len_max=6,
        entities_per_class=3,
        embedding_dim=5,
    )
    corpus, morpheme_table, entity_table = generate_synthetic_corpus(spec, micro.seed)
    corpus = corpus_mod.build_vocabularies(corpus)
    corpus = corpus_mod.assign_splits(corpus, per_class=2, seed=micro.seed)
    bundle = graphs_mod.build_graph_bundle(
        corpus,
        morpheme_table,
        entity_table,
        window=micro.window,
        entity_min_sim=micro.entity_min_sim,
        kinds=micro.enabled_kinds,
    )
    report = training.gradient_check_report(corpus, bundle, micro, step=args.step)
    print(
        f"checked {report.n_checked} entries, max relative error "
        f"{report.max_rel_error:.3e} ({report.worst_param}{list(report.worst_index)})"
    )
    for name, err in report.per_param.items():
        print(f"  {name:<16} {err:.3e}")
    if not report.passed(args.tolerance):
        print(
            f"error: gradient check failed at tolerance {args.tolerance:g}",
            file=sys.stderr,
        )
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ligram",
        description="Heterogeneous text-graph training for short-text classification",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check corpus/embedding files, print statistics")
    _add_common_flags(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("build-graphs", help="construct subgraphs and write the bundle")
    _add_common_flags(p)
    p.set_defaults(func=cmd_build_graphs)

    p = sub.add_parser("train", help="train and write checkpoint plus metric history")
    _add_common_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on one split")
    _add_common_flags(p)
    p.add_argument("--checkpoint", required=True, help="checkpoint file")
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="train the eight subgraph/SemCon configurations")
    _add_common_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("synth", help="write a synthetic corpus and embedding files")
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--docs-per-class", type=int, default=20)
    p.add_argument("--vocab-per-class", type=int, default=30)
    p.add_argument("--overlap", type=float, default=0.0)
    p.add_argument("--shared-vocab", type=int, default=30)
    p.add_argument("--doc-len-min", type=int, default=5)
    p.add_argument("--doc-len-max", type=int, default=12)
    p.add_argument("--entities-per-class", type=int, default=5)
    p.add_argument("--entities-per-doc", type=int, default=2)
    p.add_argument("--entity-density", type=float, default=0.6)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--noise", type=float, default=0.25)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("gradcheck", help="finite-difference check on a micro fixture")
    _add_common_flags(p)
    p.add_argument("--step", type=float, default=1e-5)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    level = os.environ.get("LIGRAM_LOG", "INFO").upper()
    logging.basicConfig(
        stream=sys.stderr,
        level=getattr(logging, level, logging.INFO),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except LigramError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry_point() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry_point()
