"""Command-line entry point: train, predict, evaluate, analyze, serve.

Every subcommand exits 0 on success and nonzero with a one-line diagnostic
on failure; all randomness sits behind --seed, and run configuration is
echoed into output headers so results are reproducible from their artifacts.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import analysis, annotation, evalkit, records, taggers
from .corpus import LabelSet, read_corpus, seen_token_stats
from .embeddings import load_embeddings
from .nn import RngState


def _label_set(spec: str) -> LabelSet:
    return LabelSet.from_types(t for t in spec.split(",") if t)


def _add_labels_flag(p: argparse.ArgumentParser) -> None:
    p.add_argument("--labels", type=_label_set, default=LabelSet(),
                   help="comma-separated entity types (O is implied)")


def _add_column_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--token-column", type=int, default=0,
                   help="column holding the token surface (default 0)")
    p.add_argument("--tag-column", type=int, default=1,
                   help="column holding the tag (CoNLL-2003 files use 3)")


def _read(args, path, label_set):
    return read_corpus(path, label_set, token_column=args.token_column,
                       tag_column=args.tag_column)


def _echo(header: dict) -> None:
    print("# " + json.dumps(header, sort_keys=True))


# ---------------------------------------------------------------------------

def cmd_train(args) -> int:
    corpus = _read(args, args.train, args.labels)
    config = taggers.TrainConfig(epochs=args.epochs, lr=args.lr,
                                 weight_decay=args.weight_decay,
                                 dropout=args.dropout, hidden_dim=args.hidden_dim,
                                 seed=args.seed)
    table = None
    if args.arch != taggers.ARCH_LOOKUP:
        if not args.embeddings:
            raise SystemExit(f"error: --embeddings is required for {args.arch}")
        table = load_embeddings(args.embeddings, args.embedding_dim)
    _echo({"command": "train", "arch": args.arch, "seed": args.seed,
           "epochs": config.epochs, "lr": config.lr,
           "weight_decay": config.weight_decay, "dropout": config.dropout,
           "hidden_dim": config.hidden_dim, "train": str(args.train)})
    log_path = Path(args.run_log) if args.run_log else Path(str(args.out) + ".runlog.jsonl")
    with open(log_path, "w", encoding="utf-8") as log_fh:
        def sink(entry: dict) -> None:
            log_fh.write(json.dumps(entry, sort_keys=True) + "\n")
            print(f"epoch {entry['epoch']:3d}  loss {entry['loss']:.6f}  "
                  f"{entry['seconds']:.2f}s")
        model = taggers.train(args.arch, corpus, table, config, log_sink=sink)
    taggers.save_checkpoint(model, args.out)
    print(f"checkpoint written to {args.out}")
    if args.dev:
        dev = _read(args, args.dev, args.labels)
        recs = records.predict_records(model, dev)
        report = evalkit.micro_prf(recs)
        print(f"dev micro-F1 {report.f1:.4f} (P {report.precision:.4f} "
              f"R {report.recall:.4f})")
    return 0


def cmd_predict(args) -> int:
    model = taggers.load_checkpoint(args.model)
    label_set = model.label_set
    corpus = _read(args, args.data, label_set)
    recs = records.predict_records(model, corpus, dataset=args.dataset or corpus.name)
    records.export_records(recs, args.out)
    print(f"{len(recs)} records written to {args.out}")
    return 0


def cmd_eval(args) -> int:
    recs = records.import_records(args.pred)
    report = evalkit.recognition_prf(recs) if args.recognition \
        else evalkit.micro_prf(recs, include_o=args.include_o)
    _echo({"command": "eval", "pred": str(args.pred),
           "recognition": args.recognition, "include_o": args.include_o,
           "records": len(recs)})
    if args.json:
        print(json.dumps(report.to_json(), indent=2, sort_keys=True))
    else:
        print(report.to_text())
        print()
        print(evalkit.confusion(recs).to_text())
    return 0


def cmd_patterns(args) -> int:
    corpus = _read(args, args.data, args.labels)
    honorifics = evalkit.honorific_stat(corpus)
    scores = evalkit.sports_score_stat(corpus)
    _echo({"command": "patterns", "data": str(args.data)})
    print(f"{'corpus':<16s}{'Honorifics %PER':>18s}{'Sports Scores %ORG':>20s}")
    hon = "undefined" if honorifics.undefined else f"{100 * honorifics.fraction:.2f}"
    sco = "undefined" if scores.undefined else f"{100 * scores.fraction:.2f}"
    print(f"{corpus.name:<16s}{hon:>18s}{sco:>20s}")
    print(f"honorific detail: {honorifics}")
    print(f"sports-score detail: {scores}")
    return 0


def cmd_gates(args) -> int:
    recs = records.import_records(args.pred)
    report = analysis.gate_stats(recs)
    _echo({"command": "gates", "pred": str(args.pred), "records": len(recs)})
    if args.json:
        print(json.dumps(report.to_json(), indent=2, sort_keys=True))
    else:
        print(report.to_text())
    return 0


def cmd_oracle(args) -> int:
    sets = [records.import_records(p) for p in args.pred]
    report = analysis.oracle_combine(sets, default_index=args.default)
    _echo({"command": "oracle", "pred": [str(p) for p in args.pred],
           "default": args.default})
    if args.json:
        print(json.dumps(report.to_json(), indent=2, sort_keys=True))
    else:
        print(report.to_text())
    if args.out:
        records.export_records(report.combined, args.out)
        print(f"combined records written to {args.out}")
    return 0


def cmd_mask_eval(args) -> int:
    model = taggers.load_checkpoint(args.model)
    corpus = _read(args, args.data, model.label_set)
    recs = analysis.masked_predict_records(model, corpus)
    _echo({"command": "mask-eval", "model": str(args.model), "data": str(args.data)})
    report = evalkit.micro_prf(recs)
    print(report.to_text())
    if args.out:
        records.export_records(recs, args.out)
        print(f"{len(recs)} masked records written to {args.out}")
    return 0


def cmd_overlap(args) -> int:
    set_a = records.import_records(args.pred_a)
    set_b = records.import_records(args.pred_b)
    report = analysis.error_overlap(set_a, set_b, args.sample, RngState(args.seed))
    _echo({"command": "overlap", "sample": args.sample, "seed": args.seed})
    print(report.to_text())
    return 0


def cmd_seen(args) -> int:
    train = _read(args, args.train, args.labels)
    test = _read(args, args.test, args.labels)
    stats = seen_token_stats(train, test, case_sensitive=not args.case_insensitive)
    _echo({"command": "seen", "case_sensitive": not args.case_insensitive})
    print(stats)
    return 0


def cmd_gradcheck(args) -> int:
    archs = list(taggers.TRAINABLE_ARCHITECTURES) if args.arch == "all" else [args.arch]
    _echo({"command": "gradcheck", "arch": args.arch, "seed": args.seed,
           "trials": args.trials, "eps": args.eps})
    failed = False
    for arch in archs:
        reports = taggers.gradcheck_suite(arch, args.seed, trials=args.trials,
                                          eps=args.eps)
        worst = max(r.max_rel_error for r in reports)
        status = "ok" if worst < 1e-4 else "FAIL"
        failed |= worst >= 1e-4
        print(f"{arch:<20s} max rel. error {worst:.3e}  {status}")
    return 1 if failed else 0


def cmd_annotate_items(args) -> int:
    recs = records.import_records(args.pred)
    sentences = records.sentences_from_records(recs)
    by_sentence = {}
    for rec in recs:
        by_sentence.setdefault((rec.dataset, rec.sentence_id), {})[rec.token_index] = rec
    items, skipped = [], 0
    for sid_key, sent in zip(sorted(by_sentence), sentences):
        for pos in range(len(sent)):
            rec = by_sentence[sid_key][pos]
            if args.only_errors and rec.correct:
                continue
            try:
                items.append(annotation.make_item(
                    f"{rec.dataset}-{rec.sentence_id}-{rec.token_index}",
                    sent, pos, args.labels.labels, system_pred=rec.pred))
            except annotation.TargetLeakage:
                skipped += 1
    annotation.write_items(items, args.out)
    print(f"{len(items)} items written to {args.out} "
          f"({skipped} skipped: surface occurs elsewhere in sentence)")
    return 0


def cmd_annotate_serve(args) -> int:
    from .server import create_app, serve

    items = annotation.read_items(args.items)
    batches = annotation.build_batches(items, RngState(args.seed))
    batches_path = Path(args.batches) if args.batches \
        else Path(str(args.log) + ".batches.json")
    annotation.write_batches(batches, batches_path)
    app = create_app(batches, answer_log=args.log,
                     annotators_per_batch=args.annotators_per_batch,
                     admin_token=args.admin_token, static_dir=args.static)
    print(f"{len(batches)} batches ({len(items)} items loaded); "
          f"batch layout saved to {batches_path}")
    print(f"serving on http://127.0.0.1:{args.port} (answers -> {args.log})")
    serve(app, args.port)
    return 0


def cmd_study_report(args) -> int:
    batches_path = Path(args.batches) if args.batches \
        else Path(str(args.log) + ".batches.json")
    batches = annotation.read_batches(batches_path)
    answers = annotation.read_answer_log(args.log)
    qc = annotation.qc_filter(batches, answers, global_drop=args.global_drop)
    report = annotation.error_class_report(batches, answers, qc=qc)
    _echo({"command": "study-report", "log": str(args.log),
           "answers": len(answers), "global_drop": args.global_drop})
    if args.json:
        print(json.dumps(report.to_json(), indent=2, sort_keys=True))
    else:
        print(report.to_text())
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tagscope",
        description="Probe what sequence taggers learn from words vs. context.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train any tagger architecture")
    p.add_argument("--arch", required=True, choices=taggers.ARCHITECTURES)
    p.add_argument("--train", required=True)
    p.add_argument("--dev")
    p.add_argument("--embeddings")
    p.add_argument("--embedding-dim", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--weight-decay", type=float, default=1e-4)
    p.add_argument("--dropout", type=float, default=0.5)
    p.add_argument("--hidden-dim", type=int, default=100)
    p.add_argument("--run-log")
    _add_labels_flag(p)
    _add_column_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="emit per-token prediction JSONL")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dataset")
    _add_column_flags(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="micro / recognition metrics + confusion")
    p.add_argument("--pred", required=True)
    p.add_argument("--recognition", action="store_true")
    p.add_argument("--include-o", action="store_true")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("patterns", help="honorific and sports-score statistics")
    p.add_argument("--data", required=True)
    _add_labels_flag(p)
    _add_column_flags(p)
    p.set_defaults(func=cmd_patterns)

    p = sub.add_parser("gates", help="gate statistics from gated-model records")
    p.add_argument("--pred", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_gates)

    p = sub.add_parser("oracle", help="per-token oracle combination")
    p.add_argument("--pred", nargs="+", required=True)
    p.add_argument("--default", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("mask-eval", help="context-only evaluation by masking")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    _add_column_flags(p)
    p.set_defaults(func=cmd_mask_eval)

    p = sub.add_parser("overlap", help="Sample-C / Sample-I error overlap")
    p.add_argument("--pred-a", required=True)
    p.add_argument("--pred-b", required=True)
    p.add_argument("--sample", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_overlap)

    p = sub.add_parser("seen", help="train/test entity-token overlap")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--case-insensitive", action="store_true")
    _add_labels_flag(p)
    _add_column_flags(p)
    p.set_defaults(func=cmd_seen)

    p = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    p.add_argument("--arch", required=True,
                   choices=list(taggers.TRAINABLE_ARCHITECTURES) + ["all"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--eps", type=float, default=1e-5)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("annotate-items", help="build study items from predictions")
    p.add_argument("--pred", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--only-errors", action=argparse.BooleanOptionalAction, default=True)
    _add_labels_flag(p)
    p.set_defaults(func=cmd_annotate_items)

    p = sub.add_parser("annotate-serve", help="run the annotation HTTP service")
    p.add_argument("--items", required=True)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--annotators-per-batch", type=int, default=3)
    p.add_argument("--log", default="answers.jsonl")
    p.add_argument("--batches", help="where to save batch layout "
                                     "(default <log>.batches.json)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--admin-token")
    p.add_argument("--static", help="directory with the browser UI build")
    p.set_defaults(func=cmd_annotate_serve)

    p = sub.add_parser("study-report", help="QC, majority labels, error classes")
    p.add_argument("--log", required=True)
    p.add_argument("--batches")
    p.add_argument("--global-drop", action="store_true")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_study_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return 0
    except SystemExit:
        raise
    except Exception as err:  # one-line diagnostic, nonzero exit
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
