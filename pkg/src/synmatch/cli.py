"""Command-line entry point wiring the modules into reproducible workflows.

Subcommands: ingest, train, evaluate, score, discover, gradcheck, synth.
Every run echoes its resolved configuration before doing work, all file
paths resolve relative to --workdir, and a config file given with --config
overrides flag values.  Exit codes: 0 success, 1 usage error, 2 data error,
3 numeric failure.
"""

import argparse
import os
import pickle
import sys
from dataclasses import fields

from . import corpus, embeddings, evaluation, synthetic, training
from .errors import NumericError, SynmatchError
from .errors import DataError
from .rng import stream_rng

INDEX_FORMAT = "synmatch-index"
INDEX_VERSION = 1
GRADCHECK_TOL = 1e-4


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Raises instead of exiting so main() can map usage errors to code 1."""

    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# plumbing

def _resolve(workdir, path):
    if path is None or os.path.isabs(path):
        return path
    return os.path.normpath(os.path.join(workdir, path))


def _resolve_args(args, *names):
    """Rewrite path flags in place so the echoed config shows real locations."""
    for name in names:
        setattr(args, name, _resolve(args.workdir, getattr(args, name)))


def _fmt_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def _echo(pairs):
    print("# resolved config")
    for key in sorted(pairs):
        print(f"{key}={_fmt_value(pairs[key])}")


def _echo_args(args, config=None, skip=()):
    drop = {"func", "config_text"} | set(skip)
    pairs = {k.replace("_", "-"): v for k, v in vars(args).items()
             if k not in drop and v is not None}
    if config is not None:
        pairs.update(config.to_dict())
        pairs.pop("seed", None)
    _echo(pairs)


def save_index(path, data):
    blob = {"format": INDEX_FORMAT, "version": INDEX_VERSION, "data": data}
    with open(path, "wb") as fh:
        pickle.dump(blob, fh)


def load_index(path):
    try:
        with open(path, "rb") as fh:
            blob = pickle.load(fh)
    except (pickle.UnpicklingError, EOFError, AttributeError) as exc:
        raise DataError(f"unreadable index file {path}: {exc}") from exc
    if not isinstance(blob, dict) or blob.get("format") != INDEX_FORMAT:
        raise DataError(f"{path} is not a context index file")
    if blob.get("version") != INDEX_VERSION:
        raise DataError(f"index version {blob.get('version')} unsupported "
                        f"(expected {INDEX_VERSION})")
    return blob["data"]


def _read_config_file(args):
    if getattr(args, "config", None) is None:
        return None
    path = _resolve(args.workdir, args.config)
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _apply_config(args, base):
    """Overlay the --config file (if any) on a TrainConfig built from flags."""
    text = _read_config_file(args)
    if text is None:
        return base.validate()
    return training.parse_config_text(text, base=base).validate()


def _load_model(args, data):
    params, config, meta = training.load_checkpoint(args.checkpoint)
    config = _apply_config(args, config)
    table = embeddings.load_embeddings(args.embeddings, data.vocab)
    if "embed.table" in params and params["embed.table"].shape != table.matrix.shape:
        raise DataError(
            f"checkpoint embeddings shape {params['embed.table'].shape} does not "
            f"match vocabulary table {table.matrix.shape}; wrong index or "
            f"embedding file?")
    return params, config, table, meta


# ---------------------------------------------------------------------------
# subcommands

def cmd_ingest(args):
    if args.config is not None:
        raise _UsageError("ingest does not read a config file")
    _resolve_args(args, "corpus", "synsets", "out")
    _echo_args(args)
    data = corpus.ingest(args.corpus, args.synsets, min_count=args.min_count)
    data.store = corpus.split_synsets(data.store, args.valid_frac,
                                      args.test_frac, stream_rng(args.seed, "ingest"))
    save_index(args.out, data)
    counts = {name: len(data.store.synset_ids(name))
              for name in ("train", "valid", "test")}
    print(f"ingested {len(data.lines)} lines, vocabulary {len(data.vocab)}, "
          f"{len(data.store.entities())} entities in {len(data.store)} synsets")
    print(f"split train={counts['train']} valid={counts['valid']} "
          f"test={counts['test']}")
    print(f"wrote {args.out}")
    return 0


def cmd_train(args):
    _resolve_args(args, "index", "embeddings", "checkpoint", "history")
    data = load_index(args.index)
    flags = {f.name: getattr(args, f.name) for f in fields(training.TrainConfig)
             if f.name != "seed"}
    config = _apply_config(args, training.TrainConfig(seed=args.seed, **flags))
    _echo_args(args, config, skip=[f.name for f in fields(training.TrainConfig)])
    table = embeddings.load_embeddings(args.embeddings, data.vocab)
    params, history = training.train(config, data, table)
    training.save_checkpoint(args.checkpoint, params, config,
                             meta={"trained_epochs": len(history)})
    with open(args.history, "w", encoding="utf-8") as fh:
        for h in history:
            auc = "none" if h["valid_auc"] is None else f"{h['valid_auc']:.6f}"
            fh.write(f"epoch={h['epoch']} loss={h['loss']:.12e} valid_auc={auc}\n")
    for h in history:
        auc = "none" if h["valid_auc"] is None else f"{h['valid_auc']:.6f}"
        print(f"epoch={h['epoch']} loss={h['loss']:.12e} valid_auc={auc}")
    print(f"wrote {args.checkpoint}")
    print(f"wrote {args.history}")
    return 0


def _parse_ks(text):
    try:
        ks = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise DataError(f"bad --ks value {text!r}: {exc}") from exc
    if not ks or any(k < 1 for k in ks):
        raise DataError(f"--ks needs positive integers, got {text!r}")
    return ks


def cmd_evaluate(args):
    _resolve_args(args, "index", "checkpoint", "embeddings", "out")
    data = load_index(args.index)
    params, config, table, _ = _load_model(args, data)
    _echo_args(args, config)
    ks = _parse_ks(args.ks)
    report = evaluation.evaluate(params, config, data, table, split=args.split,
                                 seed=args.seed, ks=ks, knn_k=args.knn_k,
                                 threshold=args.threshold)
    text = report.to_text()
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(text)
    print(text, end="")
    print(f"wrote {args.out}")
    return 0


def cmd_score(args):
    _resolve_args(args, "index", "checkpoint", "embeddings")
    data = load_index(args.index)
    params, config, table, _ = _load_model(args, data)
    _echo_args(args, config)
    emb = params.get("embed.table", table.matrix)
    s = evaluation.score_pair(params, config, data, emb, args.entity_a,
                              args.entity_b, seed=args.seed)
    print(f"{s:.6f}")
    return 0


def cmd_discover(args):
    _resolve_args(args, "index", "checkpoint", "embeddings")
    data = load_index(args.index)
    params, config, table, _ = _load_model(args, data)
    _echo_args(args, config)
    result = evaluation.discover(params, config, data, table, args.query,
                                 k=args.topk, threshold=args.threshold,
                                 seed=args.seed)
    print(f"CANDIDATE ENTITIES (top {args.topk} by embedding cosine)")
    for eid, sim in result.candidates:
        print(f"  {data.vocab.token(eid)}  {sim:.6f}")
    print(f"FINAL ENTITIES (model score > {args.threshold:.6f})")
    for eid, s in result.accepted:
        print(f"  {data.vocab.token(eid)}  {s:.6f}")
    return 0


def cmd_gradcheck(args):
    if args.config is not None:
        raise _UsageError("gradcheck does not read a config file")
    _echo_args(args)
    reports = training.gradcheck_model(seed=args.seed)
    worst = 0.0
    for label, report in reports:
        print(f"{label}: {report}")
        worst = max(worst, report.max_rel_error)
    print(f"worst relative error {worst:.3e}")
    if worst >= GRADCHECK_TOL:
        print(f"FAIL: above tolerance {GRADCHECK_TOL:g}", file=sys.stderr)
        return 3
    return 0


def cmd_synth(args):
    if args.config is not None:
        raise _UsageError("synth does not read a config file")
    _resolve_args(args, "out")
    _echo_args(args)
    paths = synthetic.generate(
        args.out, clusters=args.clusters,
        entities_per_cluster=args.entities_per_cluster,
        contexts_per_entity=args.contexts_per_entity,
        vocab_size=args.vocab_size, noise=args.noise,
        embed_dim=args.embed_dim, tokens_per_context=args.tokens_per_context,
        seed=args.seed)
    for name in ("corpus", "synsets", "embeddings"):
        print(f"wrote {paths[name]}")
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--workdir", default=".",
                        help="directory all relative paths resolve against")
    common.add_argument("--seed", type=int, default=0,
                        help="master seed feeding the per-subsystem streams")
    common.add_argument("--config", default=None,
                        help="key=value file whose entries override flags")

    parser = _Parser(prog="synmatch",
                     description="Context-based entity synonym detection.")
    sub = parser.add_subparsers(dest="subcommand", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("ingest", parents=[common],
                       help="build a context index from a corpus and synset file")
    p.add_argument("--corpus", required=True, help="tokenized corpus, one line per text")
    p.add_argument("--synsets", required=True, help="tab-separated synonym sets")
    p.add_argument("--out", default="index.pkl")
    p.add_argument("--min-count", type=int, default=5,
                   help="drop entities with fewer corpus occurrences")
    p.add_argument("--valid-frac", type=float, default=0.0)
    p.add_argument("--test-frac", type=float, default=0.0)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", parents=[common],
                       help="train a matching model on an ingested index")
    p.add_argument("--index", required=True)
    p.add_argument("--embeddings", required=True, help="word embedding text file")
    p.add_argument("--checkpoint", default="model.json")
    p.add_argument("--history", default="history.txt")
    defaults = training.TrainConfig()
    p.add_argument("--objective", choices=training.OBJECTIVES,
                   default=defaults.objective)
    p.add_argument("--encoder", choices=training.ENCODERS, default=defaults.encoder)
    p.add_argument("--leaky", action=argparse.BooleanOptionalAction,
                   default=defaults.leaky)
    p.add_argument("--leaky-trainable", action=argparse.BooleanOptionalAction,
                   default=defaults.leaky_trainable)
    p.add_argument("--contexts-per-entity", type=int,
                   default=defaults.contexts_per_entity)
    p.add_argument("--max-context-len", type=int, default=defaults.max_context_len)
    p.add_argument("--d-ce", type=int, default=defaults.d_ce,
                   help="context encoding width (both directions together)")
    p.add_argument("--margin", type=float, default=defaults.margin)
    p.add_argument("--optimizer", choices=training.OPTIMIZERS,
                   default=defaults.optimizer)
    p.add_argument("--batch-size", type=int, default=defaults.batch_size)
    p.add_argument("--learning-rate", type=float, default=defaults.learning_rate)
    p.add_argument("--epochs", type=int, default=defaults.epochs)
    p.add_argument("--neg-ratio", type=float, default=defaults.neg_ratio)
    p.add_argument("--clip-norm", type=float, default=defaults.clip_norm)
    p.add_argument("--fine-tune-embeddings", action=argparse.BooleanOptionalAction,
                   default=defaults.fine_tune_embeddings)
    p.add_argument("--resample-contexts", action=argparse.BooleanOptionalAction,
                   default=defaults.resample_contexts)
    p.add_argument("--pairs-per-epoch", type=int, default=defaults.pairs_per_epoch)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common],
                       help="compute AUC, MAP and ranking metrics on a split")
    p.add_argument("--index", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--split", default="test", choices=("train", "valid", "test"))
    p.add_argument("--out", default="metrics.txt")
    p.add_argument("--ks", default="1,5,10", help="comma-separated cutoffs")
    p.add_argument("--knn-k", type=int, default=50)
    p.add_argument("--threshold", type=float, default=0.8)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("score", parents=[common],
                       help="print the model score for one entity pair")
    p.add_argument("--index", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("entity_a")
    p.add_argument("entity_b")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("discover", parents=[common],
                       help="KNN candidates then model reranking for one query")
    p.add_argument("--index", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("query")
    p.add_argument("--topk", type=int, default=50)
    p.add_argument("--threshold", type=float, default=0.8)
    p.set_defaults(func=cmd_discover)

    p = sub.add_parser("gradcheck", parents=[common],
                       help="finite-difference check of the whole model")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("synth", parents=[common],
                       help="generate a synthetic corpus with known synonyms")
    p.add_argument("--out", default="synth")
    p.add_argument("--clusters", type=int, default=40)
    p.add_argument("--entities-per-cluster", type=int, default=3)
    p.add_argument("--contexts-per-entity", type=int, default=30)
    p.add_argument("--vocab-size", type=int, default=2000)
    p.add_argument("--noise", type=float, default=0.3)
    p.add_argument("--embed-dim", type=int, default=16)
    p.add_argument("--tokens-per-context", type=int, default=12)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except SynmatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
