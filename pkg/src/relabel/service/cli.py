"""Command-line entry points for the full pipeline.

Exit codes: 0 success, 1 usage error (bad flags, unknown subcommand),
2 data error (malformed corpus, missing file, degenerate experiment).

All file locations default into one data directory (--data-dir, or the
RELABEL_DATA_DIR environment variable) so a whole run is self-contained:

    train.conll         ingested or synthesized training corpus
    gap_records.jsonl   every scored disagreement from the last flag run
    queue.jsonl,
    queue_meta.json,
    decisions.jsonl     review queue state (see service.store)
    merged.conll        corpus with review decisions applied
    teacher.crf,
    student.crf         serialized models
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from ..active_loop import (
    FlagConfig,
    LoopConfig,
    flag_utterances,
    make_folds,
    merge_reannotations,
    write_gap_records,
)
from ..corpus import (
    DEFAULT_TAG_SET,
    SPLITS,
    TagSet,
    load_conll,
    save_conll,
)
from ..distill import pseudo_label, save_pseudo_labeled, two_stage_train
from ..errors import DataError
from ..metrics import entity_f1
from ..noise_lab import (
    ConfusionRule,
    NoiseSpec,
    f1_recovery_experiment,
    inject_noise,
    recovery_table,
    write_ledger,
)
from ..synth import SynthConfig, generate_corpus, strip_labels
from ..tagger import (
    TrainConfig,
    load_model,
    model_fingerprint,
    predict_corpus,
    save_model,
    train,
)
from ..tagger.features import CAPACITIES, TEACHER
from .store import QueueStore


class _CliParser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this tool reserves 2 for data
    errors, so usage problems exit 1 instead."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_train_options(parser):
    parser.add_argument("--epochs", type=int, default=5)
    parser.add_argument("--batch-size", type=int, default=64)
    parser.add_argument("--learning-rate", type=float, default=0.1)
    parser.add_argument("--l2", type=float, default=0.0)
    parser.add_argument("--max-len", type=int, default=200,
                        help="truncate utterances beyond this many tokens")
    parser.add_argument("--seed", type=int, default=0)


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        l2=args.l2,
        max_sequence_length=args.max_len,
        seed=args.seed,
    )


def _parse_focus(text: str) -> tuple[str, ...] | None:
    if text.lower() == "all":
        return None
    return tuple(part.strip() for part in text.split(",") if part.strip())


def _parse_confusion(text: str) -> tuple[ConfusionRule, ...]:
    rules = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        src, sep, dst = part.partition(":")
        if not sep or not src or not dst:
            raise DataError(f"confusion rule {part!r} is not FROM:TO")
        rules.append(ConfusionRule(src, dst))
    if not rules:
        raise DataError("no confusion rules given")
    return tuple(rules)


def _data_path(args, name: str) -> str:
    return os.path.join(args.data_dir, name)


def _corpus_path(args) -> str:
    return args.corpus if args.corpus else _data_path(args, "train.conll")


def _tag_set(args) -> TagSet:
    return TagSet(tuple(t.strip() for t in args.entity_types.split(",")))


def _flag_config(args) -> FlagConfig:
    return FlagConfig(
        threshold=args.threshold,
        focus_types=_parse_focus(args.focus),
        budget=args.budget,
        use_raw_probabilities=args.raw_probabilities,
    )


def cmd_synth(args) -> int:
    cfg = SynthConfig(n_utterances=args.n, seed=args.seed, split=args.split)
    corpus = generate_corpus(cfg)
    if args.strip:
        corpus = strip_labels(corpus)
        out = args.out or _data_path(args, "unlabeled.conll")
    else:
        out = args.out or _data_path(args, f"{args.split}.conll")
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    save_conll(corpus, out)
    print(f"wrote {len(corpus)} utterances to {out}")
    return 0


def cmd_ingest(args) -> int:
    corpus = load_conll(args.path, _tag_set(args), mode=args.mode, split=args.split)
    out = _data_path(args, f"{args.split}.conll")
    os.makedirs(args.data_dir, exist_ok=True)
    save_conll(corpus, out)
    print(f"ingested {len(corpus)} utterances into {out}")
    return 0


def cmd_folds(args) -> int:
    corpus = load_conll(_corpus_path(args), _tag_set(args), mode="strict")
    plan = make_folds(corpus, k=args.folds, seed=args.seed)
    out = _data_path(args, "folds.json")
    payload = {"k": plan.k, "seed": plan.seed, "assignment": plan.assignment}
    with open(out, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, sort_keys=True, separators=(",", ":"))
        handle.write("\n")
    sizes = [len(plan.fold_ids(f)) for f in range(plan.k)]
    print(f"assigned {len(corpus)} utterances to {plan.k} folds "
          f"(sizes {'/'.join(str(s) for s in sizes)}) -> {out}")
    return 0


def cmd_flag(args) -> int:
    corpus = load_conll(_corpus_path(args), _tag_set(args), mode="strict")
    flag_cfg = _flag_config(args)
    plan, records, selected = flag_utterances(
        corpus, flag_cfg, _train_config(args),
        k=args.folds, seed=args.seed, capacity=args.capacity,
    )
    records_path = _data_path(args, "gap_records.jsonl")
    write_gap_records(records, records_path)
    QueueStore.create(args.data_dir, corpus, records, selected, flag_cfg)
    print(f"flagged {len(selected)} of {len(corpus)} train utterances "
          f"({len(records)} scored spans) -> {_data_path(args, 'queue.jsonl')}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .app import create_app

    store = QueueStore(args.data_dir)
    app = create_app(
        store, corpus_path=_corpus_path(args), static_dir=args.ui_dir
    )
    print(f"serving review queue from {args.data_dir} "
          f"on http://{args.host}:{args.port}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_merge(args) -> int:
    store = QueueStore(args.data_dir)
    corpus = load_conll(_corpus_path(args), store.tag_set, mode="strict")
    merged = merge_reannotations(corpus, store.decision_log())
    out = args.out or _data_path(args, "merged.conll")
    save_conll(merged, out)
    counts = store.stats()
    print(f"applied {len(store.decision_log())} decisions "
          f"({counts['corrected']} corrected, {counts['accepted']} accepted) "
          f"-> {out}")
    return 0


def cmd_train(args) -> int:
    corpus = load_conll(_corpus_path(args), _tag_set(args), mode="strict")
    weights = train(corpus, _train_config(args), capacity=args.capacity)
    out = args.out or _data_path(args, f"{args.capacity}.crf")
    save_model(weights, out)
    print(f"trained {args.capacity} model on {len(corpus)} utterances "
          f"(fingerprint {model_fingerprint(weights)}) -> {out}")
    return 0


def cmd_distill(args) -> int:
    teacher = load_model(args.teacher or _data_path(args, "teacher.crf"))
    unlabeled = load_conll(
        args.unlabeled or _data_path(args, "unlabeled.conll"),
        teacher.tag_set, split="unlabeled",
    )
    gold = load_conll(_corpus_path(args), teacher.tag_set, mode="strict")
    pseudo = pseudo_label(teacher, unlabeled, confidence_floor=args.floor)
    if args.save_pseudo:
        save_pseudo_labeled(pseudo, args.save_pseudo)
    student = two_stage_train(pseudo, gold, _train_config(args))
    out = args.out or _data_path(args, "student.crf")
    save_model(student, out)
    print(f"pseudo-labeled {len(pseudo.corpus)} of {len(unlabeled)} "
          f"unlabeled utterances (floor {args.floor})")
    print(f"distilled student (fingerprint {model_fingerprint(student)}) -> {out}")
    return 0


def cmd_eval(args) -> int:
    weights = load_model(args.model)
    gold = load_conll(args.against, weights.tag_set, mode="strict", split="test")
    report = entity_f1(predict_corpus(weights, gold), gold)
    table = report.to_table()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(table)
    print(table, end="")
    return 0


def cmd_corrupt(args) -> int:
    corpus = load_conll(_corpus_path(args), _tag_set(args), mode="strict")
    spec = NoiseSpec(
        rate=args.rate, confusion=_parse_confusion(args.types),
        drop_prob=args.drop_prob, seed=args.seed,
    )
    corrupted, ledger = inject_noise(corpus, spec)
    out = args.out or _data_path(args, "corrupted.conll")
    ledger_path = _data_path(args, "ledger.jsonl")
    save_conll(corrupted, out)
    write_ledger(ledger, ledger_path)
    print(f"corrupted {len(ledger.entries)} of {len(corpus)} utterances "
          f"-> {out} (ledger {ledger_path})")
    return 0


def cmd_recover(args) -> int:
    clean = load_conll(_corpus_path(args), _tag_set(args), mode="strict")
    eval_set = load_conll(
        args.eval or _data_path(args, "test.conll"),
        _tag_set(args), mode="strict", split="test",
    )
    spec = NoiseSpec(
        rate=args.rate, confusion=_parse_confusion(args.types),
        drop_prob=args.drop_prob, seed=args.seed,
    )
    loop_cfg = LoopConfig(
        k=args.folds, seed=args.seed,
        train=_train_config(args), flag=_flag_config(args),
    )
    report = f1_recovery_experiment(clean, spec, loop_cfg, eval_set)
    table = recovery_table(report)
    detection = report.detection
    summary = (
        f"flagged {len(report.flagged)} utterances, {report.n_corrupted} corrupted: "
        f"precision {detection.precision:.3f}, recall {detection.recall:.3f}, "
        f"lift {detection.lift:.2f}\n"
    )
    if args.report:
        with open(args.report, "w", encoding="utf-8") as handle:
            handle.write(table)
            handle.write(summary)
    print(table, end="")
    print(summary, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _CliParser(
        prog="relabel",
        description="Find, review, and repair annotation errors in "
                    "BIO-tagged corpora.",
    )
    parser.add_argument(
        "--data-dir",
        default=os.environ.get("RELABEL_DATA_DIR", "relabel_data"),
        help="directory holding corpora, queue state, and models",
    )
    parser.add_argument(
        "--entity-types", default=",".join(DEFAULT_TAG_SET.entity_types),
        help="comma-separated entity types of the tag set",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split", choices=SPLITS[:3], default="train")
    p.add_argument("--strip", action="store_true",
                   help="drop all tags and store as the unlabeled pool")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="load a CoNLL file into the data dir")
    p.add_argument("path")
    p.add_argument("--split", choices=SPLITS, default="train")
    p.add_argument("--mode", choices=("repair", "strict"), default="repair")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("folds", help="write a fold assignment")
    p.add_argument("--folds", "--k", type=int, default=5, dest="folds")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--corpus", default=None)
    p.set_defaults(func=cmd_folds)

    p = sub.add_parser(
        "flag", help="run the fold loop and write the review queue"
    )
    p.add_argument("--folds", "--k", type=int, default=5, dest="folds")
    p.add_argument("--threshold", type=float, default=2.0)
    p.add_argument("--focus", default="ORG",
                   help="comma-separated entity types, or 'all'")
    p.add_argument("--budget", type=float, default=None,
                   help="cap the queue at this fraction of the train set")
    p.add_argument("--raw-probabilities", action="store_true",
                   help="score gaps on probabilities instead of log scores")
    p.add_argument("--capacity", choices=CAPACITIES, default=TEACHER)
    p.add_argument("--corpus", default=None)
    _add_train_options(p)
    p.set_defaults(func=cmd_flag)

    p = sub.add_parser("serve", help="start the HTTP review service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--ui-dir", default=None,
                   help="directory of built UI assets to serve at /")
    p.add_argument("--corpus", default=None)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("merge", help="apply review decisions to the corpus")
    p.add_argument("--out", default=None)
    p.add_argument("--corpus", default=None)
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("train", help="train and save a tagger")
    p.add_argument("--capacity", choices=CAPACITIES, default=TEACHER)
    p.add_argument("--corpus", default=None)
    p.add_argument("--out", default=None)
    _add_train_options(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser(
        "distill", help="pseudo-label a pool and two-stage train a student"
    )
    p.add_argument("--teacher", default=None)
    p.add_argument("--unlabeled", default=None)
    p.add_argument("--floor", type=float, default=0.7)
    p.add_argument("--save-pseudo", default=None)
    p.add_argument("--corpus", default=None)
    p.add_argument("--out", default=None)
    _add_train_options(p)
    p.set_defaults(func=cmd_distill)

    p = sub.add_parser("eval", help="score a model against a gold corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--against", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("corrupt", help="inject ledgered label noise")
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--types", default="ORG:PROD,PROD:ORG",
                   help="comma-separated FROM:TO confusion rules")
    p.add_argument("--drop-prob", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--corpus", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser(
        "recover", help="corrupt, flag, restore, and measure F1 recovery"
    )
    p.add_argument("--rate", type=float, default=0.1)
    p.add_argument("--types", default="ORG:PROD,PROD:ORG")
    p.add_argument("--drop-prob", type=float, default=0.0)
    p.add_argument("--folds", "--k", type=int, default=5, dest="folds")
    p.add_argument("--threshold", type=float, default=2.0)
    p.add_argument("--focus", default="ORG")
    p.add_argument("--budget", type=float, default=0.06)
    p.add_argument("--raw-probabilities", action="store_true")
    p.add_argument("--eval", default=None)
    p.add_argument("--report", default=None)
    p.add_argument("--corpus", default=None)
    _add_train_options(p)
    p.set_defaults(func=cmd_recover)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        os.makedirs(args.data_dir, exist_ok=True)
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
