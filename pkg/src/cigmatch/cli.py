"""Command line interface: ``cigmatch <command> [options]``.

Global options go before the command::

    cigmatch --config run.cfg --workers 4 train --data pairs.jsonl --variant cig-sim-gcn --out model.ckpt

A config file is flat ``key = value`` text (``#`` starts a comment); keys
are option names with dashes or underscores. Flags beat config values,
which beat built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from cigmatch import __version__
from cigmatch.baselines import bm25_classify, simnet_classify
from cigmatch.cig import EmptyPairError
from cigmatch.data import DatasetFormatError, LabeledPair, import_table, load_jsonl, resolve_data_path, save_jsonl, split
from cigmatch.data import gen_synthetic
from cigmatch.estimator import CIGMatcher, prepare_pair
from cigmatch.model import VARIANTS
from cigmatch.tensor import CheckpointError
from cigmatch.textprep import EmbeddingFormatError

EXIT_OK = 0
EXIT_INPUT = 2

INPUT_ERRORS = (
    OSError,
    DatasetFormatError,
    EmbeddingFormatError,
    CheckpointError,
    EmptyPairError,
    ValueError,
    KeyError,
)


class InputError(Exception):
    pass


def read_config(path: str) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InputError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


def _text_arg(value: str) -> str:
    """``@path`` reads the text from a file; anything else is the text itself."""
    if value.startswith("@"):
        return Path(value[1:]).read_text(encoding="utf-8")
    return value


def _split_data(path: str, seed: int):
    pairs = load_jsonl(path)
    return split(pairs, seed=seed)


def _xy(pairs: list[LabeledPair]):
    return [(p.doc_a, p.doc_b) for p in pairs], [p.label for p in pairs]


# -- commands ---------------------------------------------------------------


def cmd_gen_synthetic(args) -> int:
    pairs = gen_synthetic(
        args.n_pairs, args.n_topics, args.vocab_size, seed=args.seed, background_overlap=args.background_overlap
    )
    n = save_jsonl(pairs, args.out)
    print(f"wrote {n} pairs to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_import(args) -> int:
    pairs = import_table(args.input, args.label_col, args.doc_a_col, args.doc_b_col, args.delimiter)
    n = save_jsonl(pairs, args.out)
    print(f"wrote {n} pairs to {args.out}", file=sys.stderr)
    return EXIT_OK


def _pair_from_args(values: list[str]) -> tuple[str, str]:
    if len(values) == 2:
        return Path(values[0]).read_text(encoding="utf-8"), Path(values[1]).read_text(encoding="utf-8")
    value = values[0]
    if not value.lstrip().startswith("{"):
        # a JSONL file: take its first record
        with open(resolve_data_path(value), encoding="utf-8") as fh:
            value = next((line for line in fh if line.strip()), "")
    try:
        obj = json.loads(value)
        return str(obj["doc_a"]), str(obj["doc_b"])
    except (json.JSONDecodeError, TypeError, KeyError):
        raise InputError("--pair expects a JSON object with doc_a and doc_b, a JSONL file, or two text files") from None


def cmd_build_graph(args) -> int:
    text_a, text_b = _pair_from_args(args.pair)
    prepared = prepare_pair(text_a, text_b, use_communities=args.communities, top_k=args.top_k)
    if args.out == "dot":
        text = prepared.cig.to_dot()
    else:
        text = prepared.cig.to_json(indent=2)
    if args.output:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return EXIT_OK


def cmd_train(args) -> int:
    split_seed = args.seed if args.split_seed is None else args.split_seed
    data = _split_data(args.data, split_seed)
    metrics_fh = open(args.metrics, "w", encoding="utf-8") if args.metrics else sys.stdout

    def on_epoch(record):
        metrics_fh.write(json.dumps(record, sort_keys=True) + "\n")
        metrics_fh.flush()

    est = CIGMatcher(
        variant=args.variant,
        gcn_layers=args.gcn_layers,
        epochs=args.epochs,
        batch_size=args.batch_size,
        embedding_dim=args.embedding_dim,
        embeddings_path=args.embeddings,
        random_state=args.seed,
        n_jobs=args.workers,
    )
    try:
        est.fit(*_xy(data.train), eval_set=_xy(data.dev) if data.dev else None, on_epoch=on_epoch)
    finally:
        if metrics_fh is not sys.stdout:
            metrics_fh.close()
    est.save(
        args.out,
        binary=args.format == "binary",
        extra_meta={"data": str(resolve_data_path(args.data)), "split_seed": split_seed},
    )
    print(f"saved {args.variant} ({est.n_parameters_} parameters) to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_eval(args) -> int:
    est = CIGMatcher.load(args.ckpt)
    path = args.data or est.meta_.get("data")
    if not path:
        raise InputError("checkpoint has no data path; pass --data")
    seed = est.meta_.get("split_seed", 0) if args.split_seed is None else args.split_seed
    part = _split_data(path, seed)[args.split]
    if not part:
        raise InputError(f"split {args.split!r} is empty")
    if args.workers:
        est.n_jobs = args.workers
    _emit({"split": args.split, "n": len(part), **est.evaluate(*_xy(part))})
    return EXIT_OK


def cmd_predict(args) -> int:
    est = CIGMatcher.load(args.ckpt)
    p = est.predict_proba([(_text_arg(args.doc_a), _text_arg(args.doc_b))])[0, 1]
    print(f"{p:.6f}")
    return EXIT_OK


def cmd_baseline(args) -> int:
    data = _split_data(args.data, args.seed if args.split_seed is None else args.split_seed)
    if args.method == "bm25":
        result = bm25_classify(data)
    else:
        result = simnet_classify(data, epochs=args.epochs, batch_size=args.batch_size, random_state=args.seed)
    _emit({"method": args.method, **result})
    return EXIT_OK


# -- parser -----------------------------------------------------------------


def _variant(name: str) -> str:
    return name.lower()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cigmatch", description="Match long news article pairs with concept graphs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="flat key = value file of option defaults")
    parser.add_argument("--workers", type=int, default=None, help="processes for per-pair preprocessing")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("gen-synthetic", help="write a synthetic labeled pair corpus as JSONL")
    p.add_argument("--n-pairs", type=int, default=500)
    p.add_argument("--n-topics", type=int, default=5)
    p.add_argument("--vocab-size", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--background-overlap", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("import", help="convert a CSV/TSV table to JSONL")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--label-col", default="label")
    p.add_argument("--doc-a-col", default="doc_a")
    p.add_argument("--doc-b-col", default="doc_b")
    p.add_argument("--delimiter", default=None, help="defaults to tab for .tsv, comma otherwise")
    p.set_defaults(func=cmd_import)

    p = sub.add_parser("build-graph", help="print the concept interaction graph of one pair")
    p.add_argument("--pair", nargs="+", required=True, metavar="SRC", help="JSON line, JSONL file, or two text files")
    p.add_argument("--out", choices=("json", "dot"), default="json")
    p.add_argument("--output", help="write to this file instead of stdout")
    p.add_argument("--communities", action="store_true", help="group keywords into communities")
    p.add_argument("--top-k", type=int, default=10)
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("train", help="train a matcher; per-epoch metrics go to stdout as JSONL")
    p.add_argument("--data", required=True)
    p.add_argument("--variant", type=_variant, choices=list(VARIANTS), default="cig-sim-gcn")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split-seed", type=int, default=None, help="defaults to --seed")
    p.add_argument("--out", required=True)
    p.add_argument("--metrics", help="write the metrics JSONL here instead of stdout")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--gcn-layers", type=int, default=3)
    p.add_argument("--embedding-dim", type=int, default=64)
    p.add_argument("--embeddings", help="word vectors in text format; random when omitted")
    p.add_argument("--format", choices=("binary", "json"), default="binary")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="print accuracy and F1 of a checkpoint as JSON")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--split", choices=("train", "dev", "test"), default="test")
    p.add_argument("--data", help="defaults to the path stored in the checkpoint")
    p.add_argument("--split-seed", type=int, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="print the same-story probability of two documents")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--doc-a", required=True, help="text, or @path to read it from a file")
    p.add_argument("--doc-b", required=True, help="text, or @path to read it from a file")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("baseline", help="score a whole-document baseline on the test split")
    p.add_argument("--data", required=True)
    p.add_argument("--method", choices=("bm25", "simnet"), default="bm25")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split-seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=32)
    p.set_defaults(func=cmd_baseline)
    return parser


def _subparsers(parser: argparse.ArgumentParser) -> dict[str, argparse.ArgumentParser]:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices
    return {}


def _apply_config(parser: argparse.ArgumentParser, path: str, argv: list[str]) -> None:
    """Install config values as parser defaults so that flags still win."""
    config = read_config(path)
    subs = _subparsers(parser)
    command = next((tok for tok in argv if tok in subs), None)
    if command is None:
        return
    sub = subs[command]
    sub_actions = {a.dest: a for a in sub._actions}
    top_actions = {a.dest: a for a in parser._actions}
    for key, raw in config.items():
        action = sub_actions.get(key) or top_actions.get(key)
        if action is None or key in ("help", "config", "command"):
            raise InputError(f"{path}: unknown option {key!r} for {command}")
        if isinstance(action, argparse._StoreTrueAction):
            value = raw.lower() in ("1", "true", "yes", "on")
        else:
            try:
                value = action.type(raw) if action.type else raw
            except ValueError:
                raise InputError(f"{path}: bad value for {key}: {raw!r}") from None
            if action.choices is not None and value not in action.choices:
                sub.error(f"{path}: {key} must be one of {', '.join(map(str, action.choices))}")
        action.required = False
        (sub if key in sub_actions else parser).set_defaults(**{key: value})


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    try:
        if known.config:
            _apply_config(parser, known.config, argv)
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        return args.func(args)
    except (InputError, *INPUT_ERRORS) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"cigmatch: error: {msg}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
