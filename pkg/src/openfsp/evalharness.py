"""Leave-one-domain-out evaluation with simple labels, baselines and metrics.

For every held-out domain the agnostic tagger is trained on the remaining
domains, the head on ``examples_per_label`` sampled texts per label of the
held-out domain, and the template inventory is read off the held-out
domain's train split. Test utterances of the held-out domain are then parsed
and scored.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import warnings
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .dap_tagger import (PerceptronTagger, decode_bio, golden_parse, record_sentence, tag,
                         train_tagger)
from .dataset import Record, sample_simple_labels, select
from .embedding import ProviderConfig, make_provider
from .errors import (EmptyTrainingSet, LabelUnderpopulated, LengthMismatch, MissingDomain,
                     NoEligibleFrame)
from .head import FEW_SHOT, TrainConfig, predict_proba, train_head
from .matcher import Candidate, CosineScorer, FrameTemplate, HeadScorer, MatchResult, rank
from .ontology import Frame, OntologyMap, load_builtin_map, make_frame, map_label
from .registry import build_inventory_from_corpus, template_counts

logger = logging.getLogger(__name__)

SETTINGS = ("standard", "golden_parse", "recall_at_3", "intent_acc")
BASELINES = ("proposed", "majority_vote", "wo_head", "wo_head_type", "fully_supervised")
METRICS = ("frame_accuracy", "recall_at_1", "recall_at_3", "recall_at_inf", "intent_accuracy",
           "mrr", "candidate_reduction")
ERROR_KINDS = ("no_parse", "wrong_slot_count", "wrong_agnostic_type", "wrong_intent",
               "wrong_slot_label")


@dataclass(frozen=True)
class EvalConfig:
    examples_per_label: int = 50
    seeds: tuple[int, ...] = (1, 2, 3)
    setting: str = "standard"
    baseline: str = "proposed"
    train: TrainConfig = FEW_SHOT
    tagger_epochs: int = 5
    domains: tuple[str, ...] | None = None
    provider: ProviderConfig = field(default_factory=ProviderConfig)

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(self.seeds))
        if not self.seeds:
            raise ValueError("seeds must be nonempty")
        if self.setting not in SETTINGS:
            raise ValueError(f"unknown setting {self.setting!r}")
        if self.baseline not in BASELINES:
            raise ValueError(f"unknown baseline {self.baseline!r}")
        if self.examples_per_label < 1:
            raise ValueError("examples_per_label must be >= 1")

    @property
    def golden(self) -> bool:
        return self.setting == "golden_parse"

    def to_dict(self) -> dict:
        out = asdict(self)
        out["seeds"] = list(self.seeds)
        out["domains"] = list(self.domains) if self.domains is not None else None
        return out


# ---------------------------------------------------------------------------
# metrics

def _check_lengths(a, b):
    if len(a) != len(b):
        raise LengthMismatch(f"{len(a)} predictions for {len(b)} golds")
    if not b:
        raise LengthMismatch("metrics are undefined for an empty gold list")


def _frame_key(frame: Frame):
    return (frame.intent.label, frozenset((s.start, s.end, s.label) for s in frame.slots))


def metric_frame_accuracy(predictions: Sequence[Frame | None], golds: Sequence[Frame]) -> float:
    """Exact match on intent and labelled slot spans; ``None`` predictions count as wrong."""
    _check_lengths(predictions, golds)
    hits = sum(p is not None and _frame_key(p) == _frame_key(g) for p, g in zip(predictions, golds))
    return hits / len(golds)


def _rank(result, gold_key):
    if result is None:
        return None
    return result.rank_of(gold_key)


def metric_recall_at_k(results: Sequence[MatchResult | None], golds, k: int) -> float:
    """Fraction of examples whose gold template key appears in the top ``k``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    _check_lengths(results, golds)
    hits = 0
    for res, gold in zip(results, golds):
        r = _rank(res, gold)
        hits += r is not None and r <= k
    return hits / len(golds)


def metric_mrr(results: Sequence[MatchResult | None], golds) -> float:
    _check_lengths(results, golds)
    total = 0.0
    for res, gold in zip(results, golds):
        r = _rank(res, gold)
        total += 1.0 / r if r else 0.0
    return total / len(golds)


def metric_intent_accuracy(results: Sequence[MatchResult | None], gold_intents) -> float:
    _check_lengths(results, gold_intents)
    hits = sum(res is not None and res.best.template.intent == g
               for res, g in zip(results, gold_intents))
    return hits / len(gold_intents)


def classify_error(pred: Frame | None, gold: Frame, psi: OntologyMap) -> str | None:
    """Bucket a wrong prediction: parser errors first, then intent, then slot label."""
    if pred is not None and _frame_key(pred) == _frame_key(gold):
        return None
    if pred is None:
        return "no_parse"
    if len(pred.slots) != len(gold.slots):
        return "wrong_slot_count"
    pred_types = sorted((s.start, s.end, map_label(s.label, psi).value) for s in pred.slots)
    gold_types = sorted((s.start, s.end, map_label(s.label, psi).value) for s in gold.slots)
    if pred_types != gold_types:
        return "wrong_agnostic_type"
    if pred.intent.label != gold.intent.label:
        return "wrong_intent"
    return "wrong_slot_label"


# ---------------------------------------------------------------------------
# baselines

def majority_ranking(query: Frame, stats: Counter, domain: str = "") -> MatchResult:
    """Templates with the query's arity, most frequent first (ties lexicographic)."""
    arity = len(query.slots)
    total = sum(stats.values()) or 1
    cands = [Candidate(FrameTemplate(intent, slots, domain), count / total, ())
             for (intent, slots), count in stats.items() if len(slots) == arity]
    if not cands:
        raise NoEligibleFrame(f"no template with {arity} slots")
    cands.sort(key=lambda c: (-c.score, c.template.intent, c.template.slot_labels))
    return MatchResult(cands, query, len(cands), len(stats))


def baseline_majority_vote(query: Frame, stats: Counter, domain: str = "") -> FrameTemplate:
    return majority_ranking(query, stats, domain).best.template


def baseline_wo_head(query: Frame, inventory, examples, provider, tokens, psi,
                     k: int | None = None) -> MatchResult:
    return rank(query, inventory, CosineScorer(examples, provider), tokens, psi, k)


def baseline_wo_head_type(query: Frame, inventory, examples, provider, tokens, psi,
                          k: int | None = None) -> MatchResult:
    return rank(query, inventory, CosineScorer(examples, provider), tokens, psi, k, typed=False)


class FullySupervised:
    """One tagger over domain-specific slot tags and one intent head per domain.

    Trained on the full train split of every domain; like the heads, the
    tagger is picked by the record's domain.
    """

    def __init__(self, records: Sequence[Record], cfg: TrainConfig, provider, epochs: int = 5,
                 seed: int = 0):
        train = select(records, split="train")
        if not train:
            raise EmptyTrainingSet("no training records")
        self.provider = provider
        self.taggers: dict[str, PerceptronTagger] = {}
        self.heads = {}
        for domain in sorted({r.domain for r in train}):
            rows = [r for r in train if r.domain == domain]
            slot_labels = sorted({s.label[3:] for r in rows for s in r.frame.slots})
            tags = ["O"] + [f"{p}-{label}" for label in slot_labels for p in "BI"]
            self.taggers[domain] = PerceptronTagger(tags).train(
                [record_sentence(r) for r in rows], epochs, seed)
            examples = [(r.text, r.intent) for r in rows]
            if len({label for _, label in examples}) > 1:
                self.heads[domain] = train_head(examples, cfg, provider)

    def predict(self, record: Record, psi: OntologyMap) -> MatchResult:
        head = self.heads.get(record.domain)
        if head is None:
            raise NoEligibleFrame(f"no intent classifier for {record.domain}")
        spans = decode_bio(self.taggers[record.domain].predict(record.tokens))
        probs = predict_proba(record.text, head, self.provider)
        intent = max(sorted(probs), key=lambda label: probs[label])
        query = make_frame("IN:INTENT", len(record.tokens),
                           [(s, e, map_label(label, psi).value) for s, e, label in spans])
        order = {(s, e): i for i, (s, e, _) in enumerate(sorted(spans))}
        assignment = tuple(sorted((order[(s, e)], label) for s, e, label in spans))
        template = FrameTemplate(intent, tuple(label for _, _, label in spans), record.domain)
        return MatchResult([Candidate(template, probs[intent], assignment)], query, 1, 1)


def baseline_fully_supervised(corpus: Sequence[Record], cfg: EvalConfig | None = None,
                              psi: OntologyMap | None = None) -> "EvalReport":
    cfg = cfg or EvalConfig(baseline="fully_supervised")
    if cfg.baseline != "fully_supervised":
        cfg = EvalConfig(**{**cfg.__dict__, "baseline": "fully_supervised"})
    return run_loo(cfg, corpus, psi)


# ---------------------------------------------------------------------------
# harness

@dataclass
class Example:
    domain: str
    seed: int
    record: Record
    result: MatchResult | None
    prediction: Frame | None


@dataclass
class EvalReport:
    config: dict
    domains: list[str]
    per_domain: dict
    average: dict
    inventory_size: dict
    n_test: dict
    errors: dict
    details: list[Example] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "domains": self.domains,
            "per_domain": self.per_domain,
            "average": self.average,
            "inventory_size": self.inventory_size,
            "n_test": self.n_test,
            "errors": self.errors,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, obj) -> "EvalReport":
        return cls(obj["config"], obj["domains"], obj["per_domain"], obj["average"],
                   obj["inventory_size"], obj["n_test"], obj["errors"])

    def mean(self, metric: str, domain: str | None = None) -> float:
        block = self.average if domain is None else self.per_domain[domain]
        return block[metric]["mean"]


def _summary(values: Sequence[float]) -> dict:
    arr = np.asarray(values, dtype=np.float64)
    return {"mean": float(arr.mean()), "std": float(arr.std()), "per_seed": [float(v) for v in arr]}


def domain_metrics(records: Sequence[Record], results: Sequence[MatchResult | None],
                   predictions: Sequence[Frame | None], inventory_size: int,
                   template_level: bool = False) -> dict:
    golds = [r.frame for r in records]
    keys = [r.frame.template_key() for r in records]
    if template_level:
        frame_acc = metric_recall_at_k(results, keys, 1)
    else:
        frame_acc = metric_frame_accuracy(predictions, golds)
    n_eligible = [res.n_eligible if res is not None else 0 for res in results]
    reduction = 1.0 - (sum(n_eligible) / len(n_eligible)) / inventory_size if inventory_size else 0.0
    return {
        "frame_accuracy": frame_acc,
        "recall_at_1": metric_recall_at_k(results, keys, 1),
        "recall_at_3": metric_recall_at_k(results, keys, 3),
        "recall_at_inf": metric_recall_at_k(results, keys, 10 ** 9),
        "intent_accuracy": metric_intent_accuracy(results, [r.intent for r in records]),
        "mrr": metric_mrr(results, keys),
        "candidate_reduction": min(1.0, max(0.0, reduction)),
    }


def _safe(fn):
    try:
        return fn()
    except NoEligibleFrame:
        return None


def _predict(result: MatchResult | None) -> Frame | None:
    return result.predicted_frame() if result is not None else None


def evaluate_domain(cfg: EvalConfig, corpus: Sequence[Record], domain: str, seed: int,
                    psi: OntologyMap, provider, fully_supervised: FullySupervised | None = None):
    """Run one held-out domain for one seed; returns ``(metrics, examples, inventory_size)``."""
    train = select(corpus, split="train")
    test = select(corpus, domain, "test")
    if not test:
        raise MissingDomain(f"no test records for {domain!r}")
    inventory = build_inventory_from_corpus(domain, train)
    baseline = cfg.baseline

    tagger = None
    if not cfg.golden and baseline != "fully_supervised":
        tagger = train_tagger([r for r in train if r.domain != domain], psi,
                              cfg.tagger_epochs, seed)

    def query_of(record):
        return golden_parse(record, psi) if cfg.golden else tag(record.tokens, tagger)

    if baseline in ("proposed", "wo_head", "wo_head_type"):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", LabelUnderpopulated)
            examples = sample_simple_labels(corpus, domain, cfg.examples_per_label, seed)
        if baseline == "proposed":
            scorer = HeadScorer(train_head(examples, cfg.train, provider), provider)
        else:
            scorer = CosineScorer(examples, provider)
        typed = baseline != "wo_head_type"
        predict = lambda r, q: rank(q, inventory, scorer, r.tokens, psi, None, typed)  # noqa: E731
    elif baseline == "majority_vote":
        stats = template_counts(domain, train)
        predict = lambda r, q: majority_ranking(q, stats, domain)  # noqa: E731
    else:
        predict = lambda r, q: fully_supervised.predict(r, psi)  # noqa: E731

    results, preds, details = [], [], []
    for r in test:
        query = query_of(r) if baseline != "fully_supervised" else None
        res = _safe(lambda: predict(r, query))
        pred = _predict(res) if baseline != "majority_vote" else None
        results.append(res)
        preds.append(pred)
        details.append(Example(domain, seed, r, res, pred))
    metrics = domain_metrics(test, results, preds, len(inventory),
                             template_level=baseline == "majority_vote")
    if baseline == "fully_supervised":
        metrics["candidate_reduction"] = 0.0
    return metrics, details, len(inventory)


def run_loo(cfg: EvalConfig, corpus: Sequence[Record], psi: OntologyMap | None = None,
            keep_details: bool = False) -> EvalReport:
    psi = psi or load_builtin_map()
    present = sorted({r.domain for r in corpus})
    domains = list(cfg.domains) if cfg.domains is not None else present
    missing = [d for d in domains if d not in present]
    if missing:
        raise MissingDomain(f"domains not in corpus: {missing}")
    provider = make_provider(cfg.provider)

    per_seed: dict[str, dict[str, list[float]]] = {d: {m: [] for m in METRICS} for d in domains}
    errors = {d: Counter() for d in domains}
    inventory_size, n_test = {}, {}
    details: list[Example] = []
    for seed in cfg.seeds:
        fs = None
        if cfg.baseline == "fully_supervised":
            fs = FullySupervised(corpus, cfg.train, provider, cfg.tagger_epochs, seed)
        for domain in domains:
            logger.info("seed %s, held-out domain %s", seed, domain)
            metrics, examples, n_inv = evaluate_domain(cfg, corpus, domain, seed, psi, provider, fs)
            for m in METRICS:
                per_seed[domain][m].append(metrics[m])
            for ex in examples:
                if cfg.baseline == "majority_vote":
                    hit = ex.result is not None and ex.result.best.template.key == ex.record.frame.template_key()
                    kind = None if hit else ("no_parse" if ex.result is None else "wrong_template")
                else:
                    kind = classify_error(ex.prediction, ex.record.frame, psi)
                if kind:
                    errors[domain][kind] += 1
            inventory_size[domain] = n_inv
            n_test[domain] = len(examples)
            if keep_details:
                details.extend(examples)

    average = {}
    for m in METRICS:
        by_seed = [float(np.mean([per_seed[d][m][i] for d in domains])) for i in range(len(cfg.seeds))]
        average[m] = _summary(by_seed)
    average["inventory_size"] = _summary([float(np.mean(list(inventory_size.values())))])
    return EvalReport(
        config=cfg.to_dict(),
        domains=domains,
        per_domain={d: {m: _summary(per_seed[d][m]) for m in METRICS} for d in domains},
        average=average,
        inventory_size=inventory_size,
        n_test=n_test,
        errors={d: dict(sorted(errors[d].items())) for d in domains},
        details=details,
    )


# ---------------------------------------------------------------------------
# rendering

ROW_METRIC = {"standard": "frame_accuracy", "golden_parse": "frame_accuracy",
              "recall_at_3": "recall_at_3", "intent_acc": "intent_accuracy"}
ROW_TITLE = {"standard": "Standard", "golden_parse": "+ Golden Parse",
             "recall_at_3": "+ Recall@3", "intent_acc": "+ Intent Acc."}


def format_table(rows: Mapping[str, EvalReport]) -> str:
    """Plain-text table: one row per setting, one column per domain plus the average.

    ``rows`` maps a setting name (see ``SETTINGS``) to the report providing it;
    the standard report can back the Recall@3 and intent rows too.
    """
    if not rows:
        return ""
    first = next(iter(rows.values()))
    domains = first.domains
    header = ["Eval. Setting"] + domains + ["avg."]
    lines = [header]
    for setting, report in rows.items():
        metric = ROW_METRIC[setting]
        cells = [f"{100 * report.mean(metric, d):.1f}" for d in domains]
        lines.append([ROW_TITLE[setting]] + cells + [f"{100 * report.mean(metric):.1f}"])
    widths = [max(len(line[i]) for line in lines) for i in range(len(header))]
    out = []
    for j, line in enumerate(lines):
        out.append(" | ".join(c.ljust(w) if i == 0 else c.rjust(w)
                              for i, (c, w) in enumerate(zip(line, widths))))
        if j == 0:
            out.append("-+-".join("-" * w for w in widths))
    return "\n".join(out)


def format_metrics(report: EvalReport) -> str:
    domains = report.domains
    lines = [["metric"] + domains + ["avg.", "std"]]
    for m in METRICS:
        lines.append([m] + [f"{100 * report.mean(m, d):.1f}" for d in domains]
                     + [f"{100 * report.mean(m):.1f}", f"{100 * report.average[m]['std']:.1f}"])
    widths = [max(len(line[i]) for line in lines) for i in range(len(lines[0]))]
    return "\n".join("  ".join(c.ljust(w) if i == 0 else c.rjust(w)
                               for i, (c, w) in enumerate(zip(line, widths))) for line in lines)


def curve_csv(reports: Sequence[EvalReport], metric: str = "frame_accuracy") -> str:
    """CSV of ``baseline, examples_per_label, setting, mean, std`` for accuracy curves."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["baseline", "examples_per_label", "setting", "mean", "std"])
    for rep in reports:
        cfg = rep.config
        writer.writerow([cfg["baseline"], cfg["examples_per_label"], cfg["setting"],
                         repr(rep.average[metric]["mean"]), repr(rep.average[metric]["std"])])
    return buf.getvalue()


def check_identities(report: EvalReport, tol: float = 1e-12) -> list[str]:
    """Metric identities that must hold on every run; returns violated ones."""
    bad = []
    blocks = dict(report.per_domain)
    blocks["<avg>"] = report.average
    for name, block in blocks.items():
        for i in range(len(block["recall_at_1"]["per_seed"])):
            v = {m: block[m]["per_seed"][i] for m in METRICS}
            if any(not (0.0 <= x <= 1.0) or math.isnan(x) for x in v.values()):
                bad.append(f"{name}: metric outside [0, 1]")
            if v["recall_at_3"] < v["recall_at_1"] - tol:
                bad.append(f"{name}: recall@3 < recall@1")
            if v["mrr"] < v["recall_at_1"] - tol:
                bad.append(f"{name}: mrr < recall@1")
            if v["mrr"] > v["recall_at_inf"] + tol:
                bad.append(f"{name}: mrr > recall@inf")
    return bad
