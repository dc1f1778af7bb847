"""Command-line pipeline: gen, train, attribute, analyze, render.

Every command is deterministic given its inputs and settings; each output
file carries a 12-hex digest of the effective non-path settings in a
comment/header line, so runs can be matched to their configuration.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric error.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from .analysis import (
    heatmap_render,
    mean_abs_ligas_by_gold,
    outcome,
    render_scatter_svg,
    scatter_tables,
    sign_stats,
    write_scatter_csv,
    write_stats_csv,
)
from .attribution import (
    IGConfig,
    attribution_record,
    integrated_gradients,
    read_attributions_jsonl,
    write_attributions_jsonl,
)
from .config import CATEGORIES, config_digest, parse_config_file
from .corpus import (
    generate_all,
    generate_synthetic,
    read_corpus_tsv,
    split,
    write_corpus_tsv,
)
from .errors import DataError, LigasError, NumericError, UsageError
from .model import (
    ModelConfig,
    TrainConfig,
    accuracy,
    init,
    load_weights,
    save_weights,
    train,
)
from .tokenizer import build_vocab, tokenize
from .trees import (
    align,
    mine_patterns,
    rank_subtrees,
    read_trees,
    subtree_scores,
    to_pattern,
    write_patterns_csv,
    write_trees,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems must exit 1, not argparse's 2
        raise UsageError(message)


def build_parser() -> tuple[_Parser, dict[str, _Parser]]:
    parser = _Parser(prog="ligas", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    commands: dict[str, _Parser] = {}

    def command(name: str, help_text: str) -> _Parser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="flat key=value settings file; flags override it")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: LIGAS_THREADS or 1)")
        commands[name] = p
        return p

    g = command("gen", "generate the synthetic labeled corpus with gold trees")
    g.add_argument("--category", default="all", choices=("all",) + CATEGORIES)
    g.add_argument("--pairs", type=int, default=50, help="LA/LUA pairs per category")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output directory")

    t = command("train", "train the toy encoder on a labeled corpus")
    t.add_argument("--corpus", required=True)
    t.add_argument("--out", required=True, help="weight file path")
    t.add_argument("--vocab-size", type=int, default=512)
    t.add_argument("--d-model", type=int, default=32)
    t.add_argument("--n-heads", type=int, default=4)
    t.add_argument("--n-layers", type=int, default=2)
    t.add_argument("--d-ff", type=int, default=64)
    t.add_argument("--max-seq-len", type=int, default=32)
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--epochs", type=int, default=30)
    t.add_argument("--batch", type=int, default=16)
    t.add_argument("--holdout", type=float, default=None,
                   help="held-out fraction; when set, test accuracy is reported")
    t.add_argument("--seed", type=int, default=0)

    a = command("attribute", "integrated-gradients attributions for a corpus")
    a.add_argument("--corpus", required=True)
    a.add_argument("--weights", required=True)
    a.add_argument("--steps", type=int, default=64)
    a.add_argument("--rule", default="trapezoid", choices=("left", "right", "trapezoid"))
    a.add_argument("--baseline", default="pad_embeddings", choices=("pad_embeddings", "zero"))
    a.add_argument("--target-space", default="logit", choices=("logit", "probability"))
    a.add_argument("--target-class", default=None, choices=("LA", "LUA"))
    a.add_argument("--out", required=True, help="attributions JSONL path")

    n = command("analyze", "sign statistics, scatter export, pattern mining")
    n.add_argument("--attributions", required=True)
    n.add_argument("--trees", default=None, help="trees file (enables pattern reports)")
    n.add_argument("--aggregate", default="sum", choices=("sum", "mean"),
                   help="pattern LIGAS aggregation")
    n.add_argument("--out", required=True, help="output directory")

    r = command("render", "HTML attribution heatmaps")
    r.add_argument("--attributions", required=True)
    r.add_argument("--ids", default="all", help="comma-separated sentence ids, or 'all'")
    r.add_argument("--out", required=True, help="HTML output path")

    return parser, commands


def _scan_config_path(argv: list[str]) -> str | None:
    for i, arg in enumerate(argv):
        if arg == "--config":
            if i + 1 >= len(argv):
                raise UsageError("--config requires a path")
            return argv[i + 1]
        if arg.startswith("--config="):
            return arg.split("=", 1)[1]
    return None


_TRUE = ("1", "true", "yes", "on")
_FALSE = ("0", "false", "no", "off")


def _apply_config_file(sub: _Parser, values: dict[str, str]) -> None:
    actions = {a.dest: a for a in sub._actions
               if a.dest not in ("help", "config")}
    unknown = [k for k in values if k not in actions]
    if unknown:
        raise UsageError(f"unknown config file keys: {', '.join(sorted(unknown))}")
    defaults = {}
    for key, raw in values.items():
        action = actions[key]
        if action.type is int:
            try:
                defaults[key] = int(raw)
            except ValueError:
                raise UsageError(f"config key {key}: expected an integer, got {raw!r}")
        elif action.type is float:
            try:
                defaults[key] = float(raw)
            except ValueError:
                raise UsageError(f"config key {key}: expected a number, got {raw!r}")
        elif isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            low = raw.lower()
            if low not in _TRUE + _FALSE:
                raise UsageError(f"config key {key}: expected a boolean, got {raw!r}")
            defaults[key] = low in _TRUE
        else:
            if action.choices and raw not in action.choices:
                raise UsageError(
                    f"config key {key}: {raw!r} is not one of {sorted(action.choices)}"
                )
            defaults[key] = raw
        if action.required:
            action.required = False
    sub.set_defaults(**defaults)


def _resolve_threads(args) -> int:
    threads = args.threads
    if threads is None:
        raw = os.environ.get("LIGAS_THREADS", "1")
        try:
            threads = int(raw)
        except ValueError:
            raise UsageError(f"LIGAS_THREADS must be an integer, got {raw!r}")
    if threads < 1:
        raise UsageError(f"threads must be >= 1, got {threads}")
    return threads


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, commands = build_parser()
    try:
        config_path = _scan_config_path(argv)
        if config_path is not None:
            if not argv or argv[0] not in commands:
                raise UsageError("--config requires a leading command")
            _apply_config_file(commands[argv[0]], parse_config_file(config_path))
        args = parser.parse_args(argv)
        handler = _HANDLERS[args.command]
        return handler(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except LigasError as exc:  # pragma: no cover - future subclasses
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:  # unreadable/missing files are data problems
        print(f"data error: {exc}", file=sys.stderr)
        return 2


# ---------------------------------------------------------------------------
# command handlers
# ---------------------------------------------------------------------------


def cmd_gen(args) -> int:
    _resolve_threads(args)
    digest = config_digest({
        "command": "gen", "category": args.category,
        "pairs": args.pairs, "seed": args.seed,
    })
    if args.category == "all":
        sentences = generate_all(args.pairs, args.seed)
    else:
        sentences = generate_synthetic(args.category, args.pairs, args.seed)
    os.makedirs(args.out, exist_ok=True)
    comment = f"ligas gen config_digest={digest}"
    write_corpus_tsv(os.path.join(args.out, "corpus.tsv"), sentences, comment)
    write_trees(os.path.join(args.out, "trees.tsv"),
                [(s.id, s.tree) for s in sentences], comment)
    print(f"wrote {len(sentences)} sentences to {args.out}")
    return 0


def cmd_train(args) -> int:
    _resolve_threads(args)
    if args.holdout is not None and not (0.0 < args.holdout < 1.0):
        raise UsageError(f"--holdout must be in (0, 1), got {args.holdout}")
    settings = {
        "command": "train", "vocab_size": args.vocab_size,
        "d_model": args.d_model, "n_heads": args.n_heads,
        "n_layers": args.n_layers, "d_ff": args.d_ff,
        "max_seq_len": args.max_seq_len, "lr": args.lr,
        "epochs": args.epochs, "batch": args.batch,
        "holdout": args.holdout, "seed": args.seed,
    }
    digest = config_digest(settings)
    sentences = read_corpus_tsv(args.corpus)
    if not sentences:
        raise DataError(f"{args.corpus}: no sentences")
    if args.holdout is not None:
        train_set, test_set = split(sentences, 1.0 - args.holdout, args.seed)
    else:
        train_set, test_set = sentences, []

    vocab = build_vocab([s.text for s in train_set], args.vocab_size)
    cfg = ModelConfig(
        vocab_size=len(vocab), d_model=args.d_model, n_heads=args.n_heads,
        n_layers=args.n_layers, d_ff=args.d_ff, max_seq_len=args.max_seq_len,
        seed=args.seed,
    )

    def examples(group):
        return [(tokenize(s.text, vocab).token_ids, s.gold) for s in group]

    weights = init(cfg)
    weights.vocab = vocab
    trained, trace = train(
        weights, examples(train_set),
        TrainConfig(lr=args.lr, epochs=args.epochs, batch=args.batch, seed=args.seed),
    )
    save_weights(trained, args.out)
    vocab.save(args.out + ".vocab")
    test_acc = accuracy(trained, examples(test_set)) if test_set else None
    with open(args.out + ".loss.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# ligas train config_digest={digest}\n")
        fh.write("epoch,mean_loss\n")
        for epoch, loss in enumerate(trace.epoch_losses):
            fh.write(f"{epoch},{loss!r}\n")
        fh.write(f"# train_accuracy={trace.final_accuracy!r}\n")
        if test_acc is not None:
            fh.write(f"# holdout_accuracy={test_acc!r}\n")
    message = (f"trained on {len(train_set)} sentences; "
               f"train accuracy {trace.final_accuracy:.4f}")
    if test_acc is not None:
        message += f"; holdout accuracy {test_acc:.4f}"
    print(message)
    return 0


def cmd_attribute(args) -> int:
    threads = _resolve_threads(args)
    ig_cfg = IGConfig(
        steps=args.steps, rule=args.rule, baseline_mode=args.baseline,
        target_class=args.target_class, target_space=args.target_space,
    )
    digest = config_digest({"command": "attribute", **ig_cfg.to_dict()})
    weights = load_weights(args.weights)
    if weights.vocab is None:
        raise DataError(f"{args.weights}: weight file carries no vocabulary")
    sentences = read_corpus_tsv(args.corpus)

    def attribute_one(s):
        tokenized = tokenize(s.text, weights.vocab)
        attribution = integrated_gradients(weights, tokenized, ig_cfg)
        return attribution_record(s.id, s.category, s.gold, attribution)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(attribute_one, sentences))
    else:
        records = [attribute_one(s) for s in sentences]

    header = {"config_digest": digest, **ig_cfg.to_dict()}
    write_attributions_jsonl(args.out, records, header)
    print(f"attributed {len(records)} sentences to {args.out}")
    return 0


def cmd_analyze(args) -> int:
    _resolve_threads(args)
    digest = config_digest({"command": "analyze", "aggregate": args.aggregate})
    comment = f"ligas analyze config_digest={digest}"
    _, records = read_attributions_jsonl(args.attributions)
    os.makedirs(args.out, exist_ok=True)

    stats = sign_stats(
        (r["category"], outcome(r["predicted"], r["gold"]), r["sentence_ligas"])
        for r in records
    )
    mean_abs = mean_abs_ligas_by_gold((r["gold"], r["sentence_ligas"]) for r in records)
    write_stats_csv(os.path.join(args.out, "stats.csv"), stats, mean_abs, comment)

    cc_rows, mc_rows = scatter_tables(
        (r["prob"], r["sentence_ligas"], outcome(r["predicted"], r["gold"]))
        for r in records
    )
    for name, rows, color in (("cc", cc_rows, "#2f7d32"), ("mc", mc_rows, "#c62828")):
        write_scatter_csv(os.path.join(args.out, f"scatter_{name}.csv"), rows, comment)
        svg = render_scatter_svg(rows, f"{name.upper()} sentences", color)
        with open(os.path.join(args.out, f"scatter_{name}.svg"), "w",
                  encoding="utf-8", newline="\n") as fh:
            fh.write(f"<!-- {comment} -->\n")
            fh.write(svg)

    if args.trees is None:
        print("warning: no trees file; patterns.csv and subtree_ranks.csv skipped",
              file=sys.stderr)
        print(f"wrote stats and scatter reports to {args.out}")
        return 0

    trees = read_trees(args.trees)
    matched = []
    skipped = 0
    for r in records:
        tree = trees.get(r["id"])
        if tree is None:
            skipped += 1
            continue
        words = [w["text"] for w in r["words"]]
        try:
            align(tree, words)
        except DataError as exc:
            raise DataError(f"sentence {r['id']}: {exc}") from exc
        matched.append((r, tree))
    if skipped:
        print(f"warning: {skipped} sentence(s) have no tree; "
              f"skipped in pattern reports", file=sys.stderr)

    rows = mine_patterns(
        ((tree, r["category"], r["gold"], r["sentence_ligas"]) for r, tree in matched),
        aggregate=args.aggregate,
    )
    write_patterns_csv(os.path.join(args.out, "patterns.csv"), rows, comment)

    groups: dict[tuple[str, str, str], list] = {}
    for r, tree in matched:
        key = (r["category"], r["gold"], to_pattern(tree))
        word_ligas = [w["ligas"] for w in r["words"]]
        groups.setdefault(key, []).append(subtree_scores(tree, word_ligas))
    with open(os.path.join(args.out, "subtree_ranks.csv"), "w",
              encoding="utf-8", newline="\n") as fh:
        fh.write(f"# {comment}\n")
        fh.write("category,label,pattern,count,subtree_path,subtree,ligas\n")
        for key in sorted(groups):
            category, label, pattern = key
            ranked = rank_subtrees(groups[key])
            path = ".".join(str(i) for i in ranked.path)
            fh.write(f"{category},{label},{pattern},{len(groups[key])},"
                     f"{path},{ranked.fragment},{ranked.ligas!r}\n")

    print(f"wrote analysis reports to {args.out}")
    return 0


def cmd_render(args) -> int:
    _resolve_threads(args)
    digest = config_digest({"command": "render", "ids": args.ids})
    _, records = read_attributions_jsonl(args.attributions)
    if args.ids != "all":
        wanted = [i.strip() for i in args.ids.split(",") if i.strip()]
        if not wanted:
            raise UsageError("--ids must name at least one sentence id, or 'all'")
        by_id = {r["id"]: r for r in records}
        missing = [i for i in wanted if i not in by_id]
        if missing:
            raise DataError(f"ids not present in attributions: {', '.join(missing)}")
        records = [by_id[i] for i in wanted]
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n"
                 "<title>attribution heatmaps</title>\n</head>\n<body>\n")
        fh.write(f"<!-- ligas render config_digest={digest} -->\n")
        for r in records:
            fh.write(heatmap_render(r))
        fh.write("</body>\n</html>\n")
    print(f"rendered {len(records)} heatmap(s) to {args.out}")
    return 0


_HANDLERS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "attribute": cmd_attribute,
    "analyze": cmd_analyze,
    "render": cmd_render,
}


if __name__ == "__main__":
    sys.exit(main())
