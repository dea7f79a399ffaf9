"""Domain-specific matching: score registered frame templates against an agnostic parse.

A template's score is the mean of the intent probability for the whole
utterance and the slot-label probabilities for the query spans, maximised
over type-preserving assignments of template slots to spans. Templates
whose agnostic slot-type multiset differs from the query's are filtered
out before scoring.
"""
from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import permutations
from typing import Callable, Mapping, Protocol, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .embedding import cosine
from .errors import Ineligible, NoEligibleFrame
from .head import Head, predict_proba
from .ontology import Frame, OntologyMap, make_frame, map_label

EXHAUSTIVE_MAX = 6


@dataclass(frozen=True, order=True)
class FrameTemplate:
    intent: str
    slot_labels: tuple[str, ...] = ()
    domain: str = ""

    def __post_init__(self):
        object.__setattr__(self, "slot_labels", tuple(sorted(self.slot_labels)))

    @property
    def key(self) -> tuple[str, tuple[str, ...]]:
        return (self.intent, self.slot_labels)

    def to_dict(self) -> dict:
        return {"intent": self.intent, "slots": list(self.slot_labels), "domain": self.domain}

    @classmethod
    def from_dict(cls, obj) -> "FrameTemplate":
        return cls(obj["intent"], tuple(obj["slots"]), obj.get("domain", ""))

    @classmethod
    def of(cls, frame: Frame) -> "FrameTemplate":
        return cls(frame.intent.label, frame.slot_labels, frame.domain)


class Scorer(Protocol):
    def proba(self, text: str) -> Mapping[str, float]: ...


class HeadScorer:
    """Label probabilities from a trained head, memoised per text."""

    def __init__(self, head: Head, provider):
        self.head = head
        self.provider = provider
        self._cache: dict[str, dict[str, float]] = {}

    def proba(self, text):
        out = self._cache.get(text)
        if out is None:
            out = self._cache[text] = predict_proba(text, self.head, self.provider)
        return out


class CosineScorer:
    """Nearest-example cosine similarity per label, rescaled to [0, 1] as (c + 1) / 2."""

    def __init__(self, examples: Sequence[tuple[str, str]], provider):
        self.provider = provider
        grouped: dict[str, list[str]] = defaultdict(list)
        for text, label in examples:
            grouped[label].append(text)
        self.labels = sorted(grouped)
        self._vectors = {label: provider.embed_many(grouped[label]) for label in self.labels}
        self._cache: dict[str, dict[str, float]] = {}

    def proba(self, text):
        out = self._cache.get(text)
        if out is None:
            q = self.provider.embed(text)
            out = {}
            for label in self.labels:
                best = max(cosine(q, v) for v in self._vectors[label])
                out[label] = (best + 1.0) / 2.0
            self._cache[text] = out
        return out


class OracleScorer:
    """Probability 1 for a known gold label of a text, 0 for everything else."""

    def __init__(self, gold: Mapping[str, str]):
        self.gold = dict(gold)

    def proba(self, text):
        label = self.gold.get(text)
        return {label: 1.0} if label is not None else {}


@dataclass(frozen=True)
class Candidate:
    template: FrameTemplate
    score: float
    assignment: tuple[tuple[int, str], ...]   # (query span index, slot label)

    def to_dict(self) -> dict:
        return {
            "template": self.template.to_dict(),
            "score": float(format(self.score, ".17g")),
            "assignment": [[i, label] for i, label in self.assignment],
        }


@dataclass
class MatchResult:
    ranked: list[Candidate]
    query: Frame
    n_eligible: int = 0
    n_inventory: int = 0

    @property
    def best(self) -> Candidate:
        return self.ranked[0]

    def keys(self) -> list[tuple[str, tuple[str, ...]]]:
        return [c.template.key for c in self.ranked]

    def rank_of(self, key) -> int | None:
        for i, c in enumerate(self.ranked, 1):
            if c.template.key == key:
                return i
        return None

    def predicted_frame(self, i: int = 0) -> Frame:
        cand = self.ranked[i]
        spans = self.query.slots
        slots = [(spans[j].start, spans[j].end, label) for j, label in cand.assignment]
        return make_frame(cand.template.intent, self.query.n_tokens, slots, cand.template.domain)

    def to_dict(self) -> dict:
        return {
            "query": self.query.to_dict(),
            "ranked": [c.to_dict() for c in self.ranked],
            "n_eligible": self.n_eligible,
            "n_inventory": self.n_inventory,
        }


def eligible(template: FrameTemplate, query: Frame, psi: OntologyMap, typed: bool = True) -> bool:
    if len(template.slot_labels) != len(query.slots):
        return False
    if not typed:
        return True
    want = Counter(map_label(s.label, psi) for s in query.slots)
    have = Counter(map_label(label, psi) for label in template.slot_labels)
    return want == have


def _exact_sum(values) -> Fraction:
    return sum((Fraction(v) for v in values), Fraction(0))


def _better(candidate: list[float], best: list[float] | None) -> bool:
    if best is None:
        return True
    a, b = math.fsum(candidate), math.fsum(best)
    if a != b:
        return a > b
    return _exact_sum(candidate) > _exact_sum(best)


def solve_block(matrix) -> tuple[int, ...]:
    """Column permutation maximising the sum of ``matrix[i][perm[i]]``.

    Blocks up to ``EXHAUSTIVE_MAX`` are enumerated (exact, ties go to the
    lexicographically first permutation); larger blocks use the Hungarian
    solver.
    """
    n = len(matrix)
    if n == 0:
        return ()
    if n <= EXHAUSTIVE_MAX:
        best, best_vals = None, None
        for perm in permutations(range(n)):
            vals = [matrix[i][perm[i]] for i in range(n)]
            if _better(vals, best_vals):
                best, best_vals = perm, vals
        return best
    rows, cols = linear_sum_assignment(np.asarray(matrix, dtype=np.float64), maximize=True)
    return tuple(int(c) for _, c in sorted(zip(rows, cols)))


def best_assignment(span_types: Sequence[str], slot_labels: Sequence[str],
                    slot_types: Sequence[str], intent_prob: float,
                    prob: Callable[[int, str], float]):
    """Maximise the mean over type-preserving bijections, block by block.

    ``span_types[i]`` is the agnostic type of query span ``i``;
    ``slot_types[j]`` the type of ``slot_labels[j]``; ``prob(i, label)`` the
    probability of ``label`` for span ``i``. Returns
    ``(score, assignment)`` with ``assignment`` as sorted
    ``(span index, label)`` pairs.
    """
    if len(span_types) != len(slot_labels):
        raise Ineligible("arity mismatch")
    span_blocks: dict[str, list[int]] = defaultdict(list)
    label_blocks: dict[str, list[str]] = defaultdict(list)
    for i, t in enumerate(span_types):
        span_blocks[t].append(i)
    for label, t in zip(slot_labels, slot_types):
        label_blocks[t].append(label)
    if {t: len(v) for t, v in span_blocks.items()} != {t: len(v) for t, v in label_blocks.items()}:
        raise Ineligible("slot types do not match the query")
    values = [intent_prob]
    assignment = []
    for t in sorted(span_blocks):
        spans = span_blocks[t]
        labels = sorted(label_blocks[t])
        matrix = [[prob(i, label) for label in labels] for i in spans]
        perm = solve_block(matrix)
        for row, col in enumerate(perm):
            values.append(matrix[row][col])
            assignment.append((spans[row], labels[col]))
    return math.fsum(values) / len(values), tuple(sorted(assignment))


def _span_texts(query: Frame, tokens: Sequence[str]) -> list[str]:
    return [" ".join(tokens[s.start:s.end]) for s in query.slots]


def sim(template: FrameTemplate, query: Frame, scorer: Scorer, tokens: Sequence[str],
        psi: OntologyMap, typed: bool = True):
    """Score ``template`` against ``query``; returns ``(score, assignment)``."""
    if not eligible(template, query, psi, typed):
        raise Ineligible(f"{template.key} is not eligible for the query")
    tokens = list(tokens)
    texts = _span_texts(query, tokens)
    intent_prob = scorer.proba(" ".join(tokens)).get(template.intent, 0.0)
    if typed:
        span_types = [map_label(s.label, psi).value for s in query.slots]
        slot_types = [map_label(label, psi).value for label in template.slot_labels]
    else:
        span_types = ["*"] * len(query.slots)
        slot_types = ["*"] * len(template.slot_labels)

    def prob(i, label):
        return scorer.proba(texts[i]).get(label, 0.0)

    return best_assignment(span_types, template.slot_labels, slot_types, intent_prob, prob)


def _sort_key(c: Candidate):
    return (-c.score, c.template.intent, c.template.slot_labels, c.template.domain)


def rank(query: Frame, inventory: Sequence[FrameTemplate], scorer, tokens: Sequence[str],
         psi: OntologyMap, k: int | None = None, typed: bool = True) -> MatchResult:
    """Rank eligible templates by score.

    ``scorer`` is a single scorer or a mapping from template domain to
    scorer. ``k=None`` keeps the full ranking. Raises
    :class:`NoEligibleFrame` when nothing survives the filter.
    """
    if not inventory:
        raise ValueError("empty inventory")
    cands = []
    for template in inventory:
        if not eligible(template, query, psi, typed):
            continue
        s = scorer[template.domain] if isinstance(scorer, Mapping) else scorer
        score, assignment = sim(template, query, s, tokens, psi, typed)
        cands.append(Candidate(template, score, assignment))
    if not cands:
        raise NoEligibleFrame(f"no template matches slot types of {query.to_dict()}")
    cands.sort(key=_sort_key)
    n_eligible = len(cands)
    if k is not None:
        cands = cands[:k]
    return MatchResult(cands, query, n_eligible, len(inventory))


@dataclass
class ServedDomain:
    scorer: Scorer
    inventory: list[FrameTemplate] = field(default_factory=list)


def parse(tokens: Sequence[str] | str, model, domains: Mapping[str, ServedDomain],
          psi: OntologyMap, k: int | None = 3, gold: Frame | None = None) -> MatchResult:
    """Tag the utterance (or take ``gold`` as the agnostic parse) and rank across domains."""
    from .dap_tagger import tag

    if isinstance(tokens, str):
        tokens = tokens.split()
    if not domains:
        raise ValueError("no domains registered")
    query = gold if gold is not None else tag(tokens, model)
    inventory = [t for d in domains.values() for t in d.inventory]
    scorers = {name: d.scorer for name, d in domains.items()}
    return rank(query, inventory, scorers, tokens, psi, k)

