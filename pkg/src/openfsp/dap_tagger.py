"""Domain-agnostic parser: a greedy averaged-perceptron BIO tagger.

The tagger class itself is label-agnostic; :func:`train_tagger` builds the
17-tag agnostic model, and the fully supervised baseline reuses the class
with domain-specific slot tags.
"""
from __future__ import annotations

import json
import random
from dataclasses import replace
from typing import Iterable, Sequence

import numpy as np

from .dataset import Record, project_agnostic
from .errors import EmptyTrainingSet
from .ontology import (AGNOSTIC_DOMAIN, AGNOSTIC_SLOTS, AgnosticLabel, Frame, OntologyMap, Span,
                       make_frame)

OUTSIDE = "O"
START = "<START>"
BOS = "<s>"
EOS = "</s>"


def agnostic_tags() -> list[str]:
    tags = [OUTSIDE]
    for label in AGNOSTIC_SLOTS:
        short = label.value[3:]
        tags += [f"B-{short}", f"I-{short}"]
    return tags


def word_shape(word: str) -> str:
    out = []
    for ch in word:
        c = "X" if ch.isupper() else "x" if ch.isalpha() else "d" if ch.isdigit() else ch
        if not out or out[-1] != c:
            out.append(c)
    return "".join(out)


def featurize(tokens: Sequence[str], position: int, prev_tag: str = START) -> list[str]:
    if not 0 <= position < len(tokens):
        raise IndexError(position)
    word = tokens[position]
    low = word.lower()
    prev_word = tokens[position - 1].lower() if position > 0 else BOS
    next_word = tokens[position + 1].lower() if position + 1 < len(tokens) else EOS
    feats = [
        "bias",
        "w=" + low,
        "shape=" + word_shape(word),
        "w-1=" + prev_word,
        "w+1=" + next_word,
        "t-1=" + prev_tag,
        "isdigit=" + ("true" if word.isdigit() else "false"),
    ]
    for n in (1, 2, 3):
        feats.append(f"p{n}=" + low[:n])
        feats.append(f"s{n}=" + low[-n:])
    return feats


def spans_to_tags(n: int, spans: Iterable[tuple[int, int, str]]) -> list[str]:
    tags = [OUTSIDE] * n
    for start, end, label in spans:
        short = label[3:] if label.startswith("SL:") else label
        tags[start] = "B-" + short
        for i in range(start + 1, end):
            tags[i] = "I-" + short
    return tags


def repair_bio(tags: Sequence[str]) -> list[str]:
    """Turn every ``I-t`` not preceded by ``B-t``/``I-t`` into ``B-t``."""
    out = []
    prev_type = None
    for tag in tags:
        if tag == OUTSIDE:
            prev_type = None
            out.append(tag)
            continue
        prefix, kind = tag.split("-", 1)
        if prefix == "I" and prev_type != kind:
            tag = "B-" + kind
        out.append(tag)
        prev_type = kind
    return out


def decode_bio(tags: Sequence[str], prefix: str = "SL:") -> list[tuple[int, int, str]]:
    tags = repair_bio(tags)
    spans = []
    start = None
    kind = None
    for i, tag in enumerate(list(tags) + [OUTSIDE]):
        if start is not None and not (tag.startswith("I-") and tag[2:] == kind):
            spans.append((start, i, prefix + kind))
            start = None
        if tag.startswith("B-"):
            start, kind = i, tag[2:]
    return spans


class PerceptronTagger:
    """Greedy left-to-right averaged perceptron over BIO tags."""

    def __init__(self, tags: Sequence[str]):
        self.tags = list(tags)
        self.index = {t: i for i, t in enumerate(self.tags)}
        self.weights: dict[str, np.ndarray] = {}
        self.epochs = 0
        self.seed = 0
        self._totals: dict[str, np.ndarray] = {}
        self._stamps: dict[str, np.ndarray] = {}
        self._step = 0

    def _score(self, feats):
        scores = np.zeros(len(self.tags))
        for f in feats:
            w = self.weights.get(f)
            if w is not None:
                scores += w
        return scores

    def _update(self, feats, truth: int, guess: int):
        for f in feats:
            w = self.weights.get(f)
            if w is None:
                w = self.weights[f] = np.zeros(len(self.tags))
                self._totals[f] = np.zeros(len(self.tags))
                self._stamps[f] = np.zeros(len(self.tags))
            totals, stamps = self._totals[f], self._stamps[f]
            for idx, delta in ((truth, 1.0), (guess, -1.0)):
                totals[idx] += (self._step - stamps[idx]) * w[idx]
                stamps[idx] = self._step
                w[idx] += delta

    def _average(self):
        step = max(self._step, 1)
        for f, w in self.weights.items():
            totals = self._totals[f] + (self._step - self._stamps[f]) * w
            self.weights[f] = totals / step
        self._totals, self._stamps = {}, {}

    def train(self, sentences: Sequence[tuple[Sequence[str], Sequence[str]]],
              epochs: int = 5, seed: int = 0) -> "PerceptronTagger":
        if epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not sentences:
            raise EmptyTrainingSet("no training sentences")
        self.epochs, self.seed = epochs, seed
        rng = random.Random(seed)
        order = list(range(len(sentences)))
        for _ in range(epochs):
            rng.shuffle(order)
            for i in order:
                tokens, gold = sentences[i]
                prev = START
                for pos, tag in enumerate(gold):
                    feats = featurize(tokens, pos, prev)
                    guess = int(np.argmax(self._score(feats)))
                    truth = self.index[tag]
                    self._step += 1
                    if guess != truth:
                        self._update(feats, truth, guess)
                    prev = self.tags[guess]
        self._average()
        return self

    def predict(self, tokens: Sequence[str]) -> list[str]:
        prev = START
        out = []
        for pos in range(len(tokens)):
            prev = self.tags[int(np.argmax(self._score(featurize(tokens, pos, prev))))]
            out.append(prev)
        return out

    def dumps(self) -> str:
        header = {"tags": self.tags, "epochs": self.epochs, "seed": self.seed}
        lines = [json.dumps(header, sort_keys=True)]
        for f in sorted(self.weights):
            for idx, value in enumerate(self.weights[f].tolist()):
                if value != 0.0:
                    lines.append(json.dumps([f, self.tags[idx], value]))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "PerceptronTagger":
        lines = text.splitlines()
        header = json.loads(lines[0])
        model = cls(header["tags"])
        model.epochs, model.seed = header["epochs"], header["seed"]
        for line in lines[1:]:
            if not line.strip():
                continue
            f, tag, value = json.loads(line)
            model.weights.setdefault(f, np.zeros(len(model.tags)))[model.index[tag]] = value
        return model

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> "PerceptronTagger":
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read())

    def __eq__(self, other):
        if not isinstance(other, PerceptronTagger):
            return NotImplemented
        return self.dumps() == other.dumps()


def record_sentence(record: Record) -> tuple[tuple[str, ...], list[str]]:
    spans = [(s.start, s.end, s.label) for s in record.frame.slots]
    return record.tokens, spans_to_tags(len(record.tokens), spans)


def train_tagger(records: Sequence[Record], psi: OntologyMap | None = None, epochs: int = 5,
                 seed: int = 0) -> PerceptronTagger:
    """Train the agnostic tagger. Records are projected with ``psi`` unless already agnostic."""
    if not records:
        raise EmptyTrainingSet("no training records")
    sentences = []
    for r in records:
        if r.frame.domain != AGNOSTIC_DOMAIN:
            if psi is None:
                raise ValueError("domain-specific records need an ontology map")
            r = project_agnostic(r, psi)
        sentences.append(record_sentence(r))
    return PerceptronTagger(agnostic_tags()).train(sentences, epochs, seed)


def tag(tokens: Sequence[str] | str, model: PerceptronTagger) -> Frame:
    if isinstance(tokens, str):
        tokens = tokens.split()
    spans = decode_bio(model.predict(tokens))
    return make_frame(AgnosticLabel.INTENT.value, len(tokens), spans, AGNOSTIC_DOMAIN)


def golden_parse(record: Record, psi: OntologyMap) -> Frame:
    return project_agnostic(record, psi).frame


def frame_from_tags(tokens: Sequence[str], tags: Sequence[str], intent: str, domain: str) -> Frame:
    return make_frame(intent, len(tokens), decode_bio(tags), domain)


def relabel(frame: Frame, intent: str) -> Frame:
    return replace(frame, intent=Span(0, frame.n_tokens, intent))
