"""Reading TOP-format annotations, filtering, splits and simple-label sampling."""
from __future__ import annotations

import json
import logging
import random
import warnings
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .errors import LabelUnderpopulated, MalformedTree, NestedIntent
from .ontology import (AGNOSTIC_DOMAIN, AgnosticLabel, Frame, OntologyMap, Span,
                       is_intent, is_slot, make_frame, map_label)

logger = logging.getLogger(__name__)

TOPV2_DOMAINS = ("alarm", "event", "messaging", "music", "navigation", "reminder", "timer",
                 "weather")
SPLITS = ("train", "eval", "test")
UNSUPPORTED_PREFIX = "IN:UNSUPPORTED"


@dataclass(frozen=True)
class Record:
    tokens: tuple[str, ...]
    frame: Frame
    domain: str
    split: str = "train"

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if self.frame.n_tokens != len(self.tokens):
            raise ValueError("frame does not cover the utterance")
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")

    @property
    def text(self) -> str:
        return " ".join(self.tokens)

    @property
    def intent(self) -> str:
        return self.frame.intent.label

    def span_text(self, span: Span) -> str:
        return " ".join(self.tokens[span.start:span.end])


def parse_tree(tree: str) -> tuple[list[str], str, list[tuple[int, int, str]]]:
    """Parse a flat TOP bracketing into ``(tokens, intent, slot triples)``.

    Raises :class:`MalformedTree` on bad bracketing and :class:`NestedIntent`
    when the tree holds more than one intent or nested slots.
    """
    tokens: list[str] = []
    slots: list[tuple[int, int, str]] = []
    stack: list[tuple[str, int]] = []
    intent = None
    closed_root = False
    for piece in tree.split():
        if closed_root:
            raise MalformedTree(f"content after the root bracket: {tree!r}")
        if piece.startswith("[") and len(piece) > 1:
            label = piece[1:]
            if not (is_intent(label) or is_slot(label)):
                raise MalformedTree(f"unknown bracket label {label!r}")
            if not stack:
                if not is_intent(label):
                    raise MalformedTree("root bracket must be an intent")
                intent = label
            elif is_intent(label):
                raise NestedIntent(f"intent {label} nested inside {stack[-1][0]}")
            elif len(stack) > 1:
                raise NestedIntent(f"slot {label} nested inside {stack[-1][0]}")
            stack.append((label, len(tokens)))
        elif piece == "]":
            if not stack:
                raise MalformedTree(f"unbalanced ']' in {tree!r}")
            label, start = stack.pop()
            if stack:
                if start == len(tokens):
                    raise MalformedTree(f"empty slot {label}")
                slots.append((start, len(tokens), label))
            else:
                closed_root = True
        else:
            if not stack:
                raise MalformedTree(f"token {piece!r} outside the root bracket")
            tokens.append(piece)
    if stack or intent is None:
        raise MalformedTree(f"unbalanced brackets in {tree!r}")
    if not tokens:
        raise MalformedTree("empty utterance")
    return tokens, intent, slots


def parse_top_record(line: str, domain: str | None = None, split: str = "train") -> Record:
    """Parse one annotated line into a :class:`Record`.

    ``line`` is either a bare bracketing or a TopV2 TSV row
    ``domain<TAB>utterance<TAB>semantic_parse``; for TSV rows the utterance
    column must agree with the bracket leaves (case-insensitive), otherwise
    :class:`MalformedTree` is raised.
    """
    line = line.rstrip("\n")
    utterance = None
    if "\t" in line:
        cols = line.split("\t")
        if len(cols) < 3:
            raise MalformedTree(f"expected 3 TSV columns, got {len(cols)}")
        domain = domain or cols[0]
        utterance, line = cols[1], cols[2]
    tokens, intent, slots = parse_tree(line)
    if utterance is not None and [t.lower() for t in utterance.split()] != [t.lower() for t in tokens]:
        raise MalformedTree(f"utterance/parse token mismatch: {utterance!r}")
    frame = make_frame(intent, len(tokens), slots, domain or "unknown")
    return Record(tuple(tokens), frame, domain or "unknown", split)


def to_top_string(record: Record) -> str:
    starts: dict[int, str] = {s.start: s.label for s in record.frame.slots}
    ends = {s.end for s in record.frame.slots}
    out = ["[" + record.intent]
    for i, tok in enumerate(record.tokens):
        if i in ends:
            out.append("]")
        if i in starts:
            out.append("[" + starts[i])
        out.append(tok)
    if len(record.tokens) in ends:
        out.append("]")
    out.append("]")
    return " ".join(out)


def record_to_json(record: Record) -> dict:
    return {
        "text": record.text,
        "domain": record.domain,
        "split": record.split,
        "intent": record.intent,
        "slots": [{"start": s.start, "end": s.end, "label": s.label} for s in record.frame.slots],
    }


def record_from_json(obj: dict) -> Record:
    tokens = obj["text"].split()
    slots = [(s["start"], s["end"], s["label"]) for s in obj["slots"]]
    frame = make_frame(obj["intent"], len(tokens), slots, obj["domain"])
    return Record(tuple(tokens), frame, obj["domain"], obj.get("split", "train"))


def write_jsonl(records: Iterable[Record], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(record_to_json(r), sort_keys=True) + "\n")


def read_jsonl(path) -> list[Record]:
    with open(path, encoding="utf-8") as fh:
        return [record_from_json(json.loads(line)) for line in fh if line.strip()]


@dataclass
class SplitStats:
    counts: dict = field(default_factory=lambda: {s: 0 for s in SPLITS})
    dropped: Counter = field(default_factory=Counter)

    def to_dict(self) -> dict:
        return {"counts": dict(self.counts), "dropped": dict(sorted(self.dropped.items()))}


def is_unsupported(record: Record) -> bool:
    return record.intent.startswith(UNSUPPORTED_PREFIX)


def filter_and_split(records: Iterable[Record], stats: SplitStats | None = None):
    """Drop unsupported-intent records and count what is kept per split.

    Returns ``(kept, stats)``. Pass ``stats`` to keep accumulating drop counts
    gathered during parsing (nesting, malformed lines).
    """
    stats = stats or SplitStats()
    kept = []
    for r in records:
        if is_unsupported(r):
            stats.dropped["unsupported"] += 1
            continue
        stats.counts[r.split] += 1
        kept.append(r)
    return kept, stats


def ingest_lines(lines: Iterable[str], domain: str, split: str,
                 stats: SplitStats) -> Iterator[Record]:
    for line in lines:
        if not line.strip():
            continue
        if line.startswith("domain\t"):
            continue
        try:
            yield parse_top_record(line, domain, split)
        except NestedIntent:
            stats.dropped["multi_intent"] += 1
        except MalformedTree as exc:
            logger.debug("dropping malformed line: %s", exc)
            stats.dropped["malformed"] += 1


def read_topv2(data_dir, domains: Sequence[str] = TOPV2_DOMAINS):
    """Ingest ``{domain}_{split}.tsv`` files from a TopV2 checkout.

    Returns ``(records, stats)`` after filtering.
    """
    data_dir = Path(data_dir)
    stats = SplitStats()
    parsed: list[Record] = []
    for domain in domains:
        for split in SPLITS:
            path = data_dir / f"{domain}_{split}.tsv"
            if not path.exists():
                logger.warning("missing %s", path)
                continue
            with open(path, encoding="utf-8") as fh:
                parsed.extend(ingest_lines(fh, domain, split, stats))
    return filter_and_split(parsed, stats)


def project_agnostic(record: Record, psi: OntologyMap) -> Record:
    slots = tuple(replace(s, label=map_label(s.label, psi).value) for s in record.frame.slots)
    intent = replace(record.frame.intent, label=AgnosticLabel.INTENT.value)
    return replace(record, frame=Frame(intent, slots, AGNOSTIC_DOMAIN))


def select(records: Iterable[Record], domain: str | None = None,
           split: str | None = None) -> list[Record]:
    return [r for r in records
            if (domain is None or r.domain == domain) and (split is None or r.split == split)]


def label_texts(records: Iterable[Record]) -> dict[str, list[str]]:
    """Distinct texts per label, deduplicated case-insensitively, first casing kept."""
    seen: dict[str, dict[str, str]] = {}
    for r in records:
        seen.setdefault(r.intent, {}).setdefault(r.text.lower(), r.text)
        for s in r.frame.slots:
            text = r.span_text(s)
            seen.setdefault(s.label, {}).setdefault(text.lower(), text)
    return {label: list(texts.values()) for label, texts in sorted(seen.items())}


def sample_simple_labels(records: Iterable[Record], domain: str, k: int,
                         seed: int) -> list[tuple[str, str]]:
    """Sample up to ``k`` example texts per intent and slot label of ``domain``.

    Only the domain's train split is used. Intents are exemplified by whole
    utterances, slots by their span text.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    pool = label_texts(select(records, domain, "train"))
    out = []
    for label, texts in pool.items():
        texts = sorted(texts, key=lambda t: (t.lower(), t))
        if len(texts) < k:
            warnings.warn(f"{domain}/{label}: only {len(texts)} distinct texts for k={k}",
                          LabelUnderpopulated, stacklevel=2)
            chosen = texts
        else:
            chosen = random.Random(f"{seed}:{domain}:{label}").sample(texts, k)
        out.extend((t, label) for t in chosen)
    return out
