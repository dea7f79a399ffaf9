import random

import pytest
from hypothesis import given, settings, strategies as st

from openfsp.dap_tagger import (PerceptronTagger, agnostic_tags, decode_bio, featurize,
                                golden_parse, record_sentence, repair_bio, spans_to_tags, tag,
                                train_tagger)
from openfsp.dataset import parse_top_record, project_agnostic, select
from openfsp.errors import EmptyTrainingSet

TAGS = agnostic_tags()


def test_tag_set():
    assert len(TAGS) == 17 and TAGS[0] == "O"
    assert len(set(TAGS)) == 17


def test_featurize_examples():
    toks = "wake me at 6 am".split()
    assert "isdigit=true" in featurize(toks, 3)
    assert "isdigit=false" in featurize(toks, 0)
    assert "w-1=<s>" in featurize(toks, 0)
    assert "w+1=</s>" in featurize(toks, 4)
    assert featurize(toks, 2, "O") == featurize(toks, 2, "O")
    assert "t-1=B-NUMS" in featurize(toks, 4, "B-NUMS")
    f = featurize(["Alarm"], 0)
    assert {"w=alarm", "shape=Xx", "p1=a", "p3=ala", "s2=rm"} <= set(f)
    with pytest.raises(IndexError):
        featurize(toks, 5)


def test_bio_decoding():
    assert decode_bio(["O", "B-SCOPE_TEMPORAL", "I-SCOPE_TEMPORAL", "O"]) == \
        [(1, 3, "SL:SCOPE_TEMPORAL")]
    assert decode_bio(["O"] * 4) == []
    assert repair_bio(["O", "I-NUMS", "O"]) == ["O", "B-NUMS", "O"]
    assert decode_bio(["O", "I-NUMS", "O"]) == [(1, 2, "SL:NUMS")]
    assert decode_bio(["B-NUMS", "I-DELIVERABLE"]) == [(0, 1, "SL:NUMS"), (1, 2, "SL:DELIVERABLE")]


@settings(max_examples=300, deadline=None)
@given(st.lists(st.sampled_from(TAGS), max_size=20))
def test_repair_only_touches_prefixes(tags):
    fixed = repair_bio(tags)
    # labelled/unlabelled pattern and types unchanged
    assert [t[2:] for t in fixed] == [t[2:] for t in tags]
    # result is valid BIO and repair is idempotent
    for prev, cur in zip(["O"] + fixed, fixed):
        if cur.startswith("I-"):
            assert prev[2:] == cur[2:]
    assert repair_bio(fixed) == fixed
    # only orphan I- tags changed
    for prev, before, after in zip(["O"] + list(tags), tags, fixed):
        if before != after:
            assert before.startswith("I-") and prev[2:] != before[2:]
    spans = decode_bio(tags)
    assert all(0 <= s < e <= len(tags) for s, e, _ in spans)
    assert all(a[1] <= b[0] for a, b in zip(spans, spans[1:]))


def _synthetic(n=50, seed=0):
    rng = random.Random(seed)
    out = []
    for _ in range(n):
        when = rng.choice(["tomorrow", "tonight", "monday"])
        what = rng.choice(["laundry", "groceries", "homework"])
        line = rng.choice([f"[IN:X remind me about [SL:TODO {what} ] [SL:DATE_TIME {when} ] ]",
                           f"[IN:X [SL:DATE_TIME {when} ] do [SL:TODO {what} ] ]"])
        out.append(parse_top_record(line, "d"))
    return out


def test_training_accuracy_on_unambiguous_corpus(psi):
    corpus = _synthetic()
    model = train_tagger(corpus, psi)
    total = correct = 0
    for r in corpus:
        _, gold = record_sentence(project_agnostic(r, psi))
        pred = model.predict(r.tokens)
        total += len(gold)
        correct += sum(a == b for a, b in zip(gold, pred))
    assert correct / total >= 0.95


def test_training_rules(psi):
    with pytest.raises(EmptyTrainingSet):
        train_tagger([], psi)
    with pytest.raises(ValueError):
        PerceptronTagger(TAGS).train([(("a",), ["O"])], epochs=0)
    with pytest.raises(ValueError):
        train_tagger(_synthetic(3))


def test_determinism_and_persistence(psi, tmp_path):
    a = train_tagger(_synthetic(), psi, seed=4)
    b = train_tagger(_synthetic(), psi, seed=4)
    assert a == b
    a.save(tmp_path / "m.jsonl")
    c = PerceptronTagger.load(tmp_path / "m.jsonl")
    assert c == a
    toks = "remind me about laundry tomorrow".split()
    assert c.predict(toks) == a.predict(toks)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from(["set", "an", "alarm", "at", "6", "am", "call", "mom", "x"]),
                min_size=1, max_size=15))
def test_tag_output_is_a_valid_frame(tokens):
    frame = tag(tokens, _MODEL)
    assert frame.intent.label == "IN:INTENT"
    assert (frame.intent.start, frame.intent.end) == (0, len(tokens))
    assert all(0 <= s.start < s.end <= len(tokens) for s in frame.slots)


_MODEL = None


@pytest.fixture(autouse=True, scope="module")
def _model(toy, psi):
    global _MODEL
    _MODEL = train_tagger(select(toy, "alarm", "train"), psi)


def test_golden_parse(psi, toy):
    r = parse_top_record("[IN:CREATE_ALARM wake me [SL:DATE_TIME at 6 am ] ]", "alarm")
    g = golden_parse(r, psi)
    assert [(s.start, s.end, s.label) for s in g.slots] == [(2, 5, "SL:SCOPE_TEMPORAL")]
    assert golden_parse(parse_top_record("[IN:GET_ALARM show alarms ]"), psi).slots == ()
    assert all(golden_parse(x, psi) == project_agnostic(x, psi).frame for x in toy[:200])


def test_spans_to_tags():
    assert spans_to_tags(4, [(1, 3, "SL:NUMS")]) == ["O", "B-NUMS", "I-NUMS", "O"]
