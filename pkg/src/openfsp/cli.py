"""``openfsp`` command line: ingest, train-dap, register, finalize, parse, evaluate, report.

Results go to stdout, logs to stderr. Exit status is 0 on success, 1 on a
library error and 2 on a usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .dap_tagger import PerceptronTagger, train_tagger
from .dataset import (TOPV2_DOMAINS, parse_tree, read_jsonl, read_topv2, select, write_jsonl)
from .embedding import ProviderConfig, make_provider
from .errors import OpenFSPError
from .evalharness import (BASELINES, ROW_METRIC, SETTINGS, EvalConfig, EvalReport, curve_csv,
                          format_metrics, format_table, run_loo)
from .head import FEW_SHOT, TrainConfig
from .matcher import parse
from .ontology import AgnosticLabel, make_frame
from .registry import TAGGER_FILE, Registry
from .toy import generate_toy_corpus

logger = logging.getLogger("openfsp")


class UsageError(Exception):
    pass


def _seeds(text: str) -> tuple[int, ...]:
    try:
        seeds = tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None
    if not seeds:
        raise argparse.ArgumentTypeError("empty seed list")
    return seeds


def _add_corpus(p):
    g = p.add_argument_group("corpus (pick one)")
    g.add_argument("--data", help="JSONL corpus written by `openfsp ingest`")
    g.add_argument("--data-dir", help="directory of TopV2 {domain}_{split}.tsv files")
    g.add_argument("--toy", action="store_true", help="use the generated two-domain corpus")


def _add_provider(p):
    p.add_argument("--provider", choices=("hashed", "cached", "external"), default="hashed")
    p.add_argument("--dim", type=int, default=256)
    p.add_argument("--endpoint")
    p.add_argument("--cache-path")


def _provider_config(args) -> ProviderConfig:
    try:
        return ProviderConfig(args.provider, args.dim, args.cache_path, args.endpoint)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load_corpus(args):
    chosen = [bool(args.data), bool(args.data_dir), bool(args.toy)]
    if sum(chosen) != 1:
        raise UsageError("give exactly one of --data, --data-dir, --toy")
    if args.data:
        return read_jsonl(args.data)
    if args.data_dir:
        records, stats = read_topv2(args.data_dir)
        logger.info("ingested %s", stats.to_dict())
        return records
    return generate_toy_corpus()


def _emit(obj, args, text: str | None = None):
    if args.json or text is None:
        sys.stdout.write(json.dumps(obj, sort_keys=True, indent=2) + "\n")
    else:
        sys.stdout.write(text.rstrip("\n") + "\n")


def cmd_ingest(args):
    if args.toy:
        records = generate_toy_corpus(seed=args.seed)
        stats = {"train": len(select(records, split="train")),
                 "eval": len(select(records, split="eval")),
                 "test": len(select(records, split="test"))}
    elif args.data_dir:
        records, split_stats = read_topv2(args.data_dir, args.domains or TOPV2_DOMAINS)
        stats = split_stats.to_dict()
    else:
        raise UsageError("ingest needs --data-dir or --toy")
    write_jsonl(records, args.out)
    _emit({"out": str(args.out), "stats": stats}, args)


def cmd_train_dap(args):
    corpus = select(_load_corpus(args), split="train")
    if args.exclude_domain:
        corpus = [r for r in corpus if r.domain not in args.exclude_domain]
    reg = Registry.load(args.registry)
    model = train_tagger(corpus, reg.psi, args.epochs, args.seed)
    out = Path(args.out) if args.out else Path(args.registry) / TAGGER_FILE
    out.parent.mkdir(parents=True, exist_ok=True)
    model.save(out)
    _emit({"model": str(out), "sentences": len(corpus), "features": len(model.weights)}, args)


def cmd_register(args):
    reg = Registry.load(args.registry)
    spec = reg.register(args.spec)
    reg.save(args.registry)
    _emit({"domain": spec.name, "version": spec.version, "templates": len(spec.templates),
           "labels": spec.labels()}, args)


def cmd_finalize(args):
    reg = Registry.load(args.registry)
    cfg = TrainConfig(args.learning_rate or FEW_SHOT.learning_rate,
                      args.epochs or FEW_SHOT.epochs, args.l2, args.seed)
    provider = make_provider(_provider_config(args))
    spec = reg.finalize(args.domain, cfg, provider)
    reg.save(args.registry)
    _emit({"domain": spec.name, "version": spec.version, "labels": list(spec.head.labels),
           "final_loss": spec.head.losses[-1], "provider": spec.head.provider_fingerprint}, args)


def cmd_parse(args):
    reg = Registry.load(args.registry)
    served = reg.served()
    if not served:
        raise UsageError(f"no finalized domains in {args.registry}")
    gold = None
    if args.golden_parse:
        tokens, _, slots = parse_tree(args.golden_parse)
        gold = make_frame(AgnosticLabel.INTENT.value, len(tokens), slots)
        if args.text and args.text.split() != tokens:
            raise UsageError("--text does not match the tokens of --golden-parse")
        model = None
    else:
        if not args.text:
            raise UsageError("parse needs --text or --golden-parse")
        tokens = args.text.split()
        model = PerceptronTagger.load(args.model or Path(args.registry) / TAGGER_FILE)
    result = parse(tokens, model, served, reg.psi, args.k, gold)
    out = result.to_dict()
    out["frame"] = result.predicted_frame().to_dict()
    _emit(out, args)


def cmd_evaluate(args):
    corpus = _load_corpus(args)
    setting = "golden_parse" if args.golden_parse else args.setting
    cfg = EvalConfig(examples_per_label=args.examples_per_label, seeds=args.seeds,
                     setting=setting, baseline=args.baseline, tagger_epochs=args.tagger_epochs,
                     domains=tuple(args.domains) if args.domains else None,
                     provider=_provider_config(args))
    report = run_loo(cfg, corpus)
    if args.out:
        Path(args.out).write_text(report.to_json() + "\n", encoding="utf-8")
    _emit(report.to_dict(), args, format_metrics(report))


def cmd_report(args):
    reports = [EvalReport.from_dict(json.loads(Path(p).read_text(encoding="utf-8")))
               for p in args.reports]
    if args.csv:
        sys.stdout.write(curve_csv(reports, args.metric))
        return
    rows = {}
    for rep in reports:
        setting = rep.config["setting"]
        rows[setting] = rep
        if setting == "standard":
            # Recall@3 and intent accuracy are read off the standard run
            rows.setdefault("recall_at_3", rep)
            rows.setdefault("intent_acc", rep)
    ordered = {s: rows[s] for s in SETTINGS if s in rows}
    if args.json:
        _emit({s: {"metric": ROW_METRIC[s],
                   "per_domain": {d: rep.mean(ROW_METRIC[s], d) for d in rep.domains},
                   "mean": rep.mean(ROW_METRIC[s])} for s, rep in ordered.items()}, args)
    else:
        sys.stdout.write(format_table(ordered) + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="openfsp", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="read TopV2 TSVs (or the toy corpus) into JSONL")
    p.add_argument("--data-dir")
    p.add_argument("--toy", action="store_true")
    p.add_argument("--domains", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train-dap", help="train the domain-agnostic tagger")
    _add_corpus(p)
    p.add_argument("--registry", required=True, help="registry dir (its map extensions are used)")
    p.add_argument("--out", help=f"model path (default <registry>/{TAGGER_FILE})")
    p.add_argument("--exclude-domain", nargs="+")
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_dap)

    p = sub.add_parser("register", help="validate a domain spec file and add it to a registry")
    p.add_argument("--registry", required=True)
    p.add_argument("--spec", required=True)
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("finalize", help="train a registered domain's head")
    p.add_argument("--registry", required=True)
    p.add_argument("--domain", required=True)
    _add_provider(p)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_finalize)

    p = sub.add_parser("parse", help="parse one utterance against the registered domains")
    p.add_argument("--registry", required=True)
    p.add_argument("--text")
    p.add_argument("--model", help=f"tagger path (default <registry>/{TAGGER_FILE})")
    p.add_argument("--golden-parse", metavar="TREE",
                   help="bracketed domain-agnostic parse to use instead of the tagger")
    p.add_argument("--k", type=int, default=3)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("evaluate", help="leave-one-domain-out evaluation")
    _add_corpus(p)
    p.add_argument("--examples-per-label", type=int, default=50)
    p.add_argument("--seeds", type=_seeds, default=(1, 2, 3), help="comma-separated, e.g. 1,2,3")
    p.add_argument("--setting", choices=SETTINGS, default="standard")
    p.add_argument("--golden-parse", action="store_true", help="shorthand for --setting golden_parse")
    p.add_argument("--baseline", choices=BASELINES, default="proposed")
    p.add_argument("--tagger-epochs", type=int, default=5)
    p.add_argument("--domains", nargs="+")
    p.add_argument("--out", help="also write the JSON report here")
    _add_provider(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="render saved evaluation reports")
    p.add_argument("reports", nargs="+")
    p.add_argument("--csv", action="store_true", help="accuracy-curve CSV instead of a table")
    p.add_argument("--metric", default="frame_accuracy")
    p.set_defaults(func=cmd_report)

    for action in sub.choices.values():
        action.add_argument("--json", action="store_true", help="machine-readable stdout")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        _error(args, "UsageError", str(exc))
        return 2
    except (OpenFSPError, OSError, ValueError) as exc:
        _error(args, type(exc).__name__, str(exc))
        return 1
    return 0


def _error(args, kind: str, message: str):
    if getattr(args, "json", False):
        sys.stderr.write(json.dumps({"error": kind, "message": message}, sort_keys=True) + "\n")
    else:
        sys.stderr.write(f"openfsp: {kind}: {message}\n")


if __name__ == "__main__":
    sys.exit(main())
