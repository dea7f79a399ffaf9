import json
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from openfsp.embedding import HashedProvider
from openfsp.errors import Ineligible, NoEligibleFrame
from openfsp.matcher import (Candidate, CosineScorer, FrameTemplate, OracleScorer,
                             ServedDomain, best_assignment, eligible, parse, rank, sim,
                             solve_block)
from openfsp.ontology import make_frame


class TableScorer:
    def __init__(self, table):
        self.table = table

    def proba(self, text):
        return self.table.get(text, {})


def agn(n, slots):
    return make_frame("IN:INTENT", n, slots)


def test_eligibility(psi):
    q = agn(4, [(0, 1, "SL:SCOPE_TEMPORAL"), (2, 3, "SL:DELIVERABLE")])
    assert eligible(FrameTemplate("IN:CREATE_ALARM", ("SL:DATE_TIME", "SL:ALARM_NAME")), q, psi)
    assert not eligible(FrameTemplate("IN:X", ("SL:DATE_TIME",)), agn(2, [(0, 1, "SL:SCOPE_LOC")]), psi)
    assert eligible(FrameTemplate("IN:X"), agn(2, []), psi)
    assert not eligible(FrameTemplate("IN:X", ("SL:DATE_TIME",)), q, psi)
    assert eligible(FrameTemplate("IN:X", ("SL:AMOUNT", "SL:TODO")), q, psi, typed=False)


def test_sim_distinct_types(psi):
    tokens = "a b c".split()
    q = agn(3, [(0, 1, "SL:SCOPE_TEMPORAL"), (2, 3, "SL:DELIVERABLE")])
    scorer = TableScorer({"a b c": {"IN:X": 0.9}, "a": {"SL:DATE_TIME": 0.8},
                          "c": {"SL:TODO": 0.6}})
    score, assignment = sim(FrameTemplate("IN:X", ("SL:DATE_TIME", "SL:TODO")), q, scorer,
                            tokens, psi)
    assert score == pytest.approx((0.9 + 0.8 + 0.6) / 3, abs=1e-15)
    assert assignment == ((0, "SL:DATE_TIME"), (1, "SL:TODO"))


def test_sim_same_type_block(psi):
    tokens = "a b".split()
    q = agn(2, [(0, 1, "SL:SCOPE_TEMPORAL"), (1, 2, "SL:SCOPE_TEMPORAL")])
    scorer = TableScorer({"a b": {"IN:X": 1.0},
                          "a": {"SL:DATE_TIME": 0.9, "SL:DURATION": 0.2},
                          "b": {"SL:DATE_TIME": 0.1, "SL:DURATION": 0.8}})
    score, assignment = sim(FrameTemplate("IN:X", ("SL:DURATION", "SL:DATE_TIME")), q, scorer,
                            tokens, psi)
    assert score == pytest.approx(0.9, abs=1e-15)
    assert assignment == ((0, "SL:DATE_TIME"), (1, "SL:DURATION"))


def test_sim_rejects_ineligible(psi):
    with pytest.raises(Ineligible):
        sim(FrameTemplate("IN:X", ("SL:DATE_TIME",)), agn(1, []), TableScorer({}), ["a"], psi)


def _random_instance(rng, max_block=5, types="ABC"):
    n_types = rng.randint(1, len(types))
    span_types, labels, slot_types = [], [], []
    for t in types[:n_types]:
        for j in range(rng.randint(0, max_block)):
            span_types.append(t)
            labels.append(f"SL:{t}{j}")
            slot_types.append(t)
    rng.shuffle(span_types)
    table = {(i, l): rng.random() for i in range(len(span_types)) for l in labels}
    return span_types, labels, slot_types, rng.random(), table


def test_blockwise_equals_brute_force():
    rng = random.Random(0)
    checked = 0
    while checked < 300:
        span_types, labels, slot_types, ip, table = _random_instance(rng, max_block=3)
        if len(labels) > 7:
            continue
        prob = lambda i, l: table[(i, l)]  # noqa: E731
        got, _ = best_assignment(span_types, labels, slot_types, ip, prob)
        want = oracles.brute_force_sim(ip, labels, span_types, slot_types, prob)
        assert got == want
        checked += 1


def test_hungarian_path_matches_enumeration():
    rng = np.random.default_rng(5)
    for _ in range(20):
        m = rng.random((7, 7))
        perm = solve_block(m.tolist())
        value = sum(m[i, perm[i]] for i in range(7))
        import itertools
        best = max(sum(m[i, p[i]] for i in range(7)) for p in itertools.permutations(range(7)))
        assert value == pytest.approx(best, abs=1e-12)


def test_ties_go_to_first_permutation():
    assert solve_block([[0.5, 0.5], [0.5, 0.5]]) == (0, 1)


def _inventory():
    return [FrameTemplate("IN:CREATE_ALARM", ("SL:DATE_TIME",), "alarm"),
            FrameTemplate("IN:DELETE_ALARM", ("SL:DATE_TIME",), "alarm"),
            FrameTemplate("IN:GET_ALARM", ("SL:ORDINAL",), "alarm"),
            FrameTemplate("IN:SILENCE_ALARM", (), "alarm")]


def test_single_eligible_ranks_first(psi):
    q = agn(2, [(1, 2, "SL:SCOPE_DISAM")])
    res = rank(q, _inventory(), TableScorer({}), ["x", "y"], psi)
    assert res.keys() == [("IN:GET_ALARM", ("SL:ORDINAL",))] and res.n_eligible == 1


def test_tie_break_and_inventory_order(psi):
    q = agn(2, [(1, 2, "SL:SCOPE_TEMPORAL")])
    res = rank(q, _inventory(), TableScorer({}), ["x", "y"], psi)
    assert [c.template.intent for c in res.ranked] == ["IN:CREATE_ALARM", "IN:DELETE_ALARM"]
    rev = rank(q, list(reversed(_inventory())), TableScorer({}), ["x", "y"], psi)
    assert rev.to_dict() == res.to_dict()


def test_no_eligible(psi):
    with pytest.raises(NoEligibleFrame):
        rank(agn(2, [(0, 1, "SL:SCOPE_LOC")]), _inventory(), TableScorer({}), ["x", "y"], psi)
    with pytest.raises(ValueError):
        rank(agn(1, []), [], TableScorer({}), ["x"], psi)


def test_scores_sorted_in_unit_interval(psi, toy):
    from openfsp.registry import build_inventory_from_corpus
    inv = build_inventory_from_corpus("alarm", toy)
    from openfsp.dap_tagger import golden_parse
    scorer = CosineScorer([("set an alarm", "IN:CREATE_ALARM"), ("at 6 am", "SL:DATE_TIME")],
                          HashedProvider())
    for r in toy[:100]:
        try:
            res = rank(golden_parse(r, psi), inv, scorer, r.tokens, psi)
        except NoEligibleFrame:
            continue
        scores = [c.score for c in res.ranked]
        assert scores == sorted(scores, reverse=True)
        assert all(0.0 <= s <= 1.0 for s in scores)


def test_slotless_query_orders_by_intent_probability(psi):
    inv = [FrameTemplate("IN:A"), FrameTemplate("IN:B"), FrameTemplate("IN:C")]
    scorer = TableScorer({"hi there": {"IN:A": 0.2, "IN:B": 0.5, "IN:C": 0.3}})
    res = rank(agn(2, []), inv, scorer, ["hi", "there"], psi)
    assert [c.template.intent for c in res.ranked] == ["IN:B", "IN:C", "IN:A"]


def test_cosine_scorer_rescaling():
    p = HashedProvider()
    s = CosineScorer([("at 6 am", "SL:DATE_TIME"), ("laundry", "SL:TODO")], p)
    assert s.proba("at 6 am")["SL:DATE_TIME"] == pytest.approx(1.0, abs=1e-12)
    assert 0.0 <= s.proba("zzz")["SL:TODO"] <= 1.0


def test_parse_with_gold_and_oracle(psi):
    tokens = "wake me at 6".split()
    gold = agn(4, [(2, 4, "SL:SCOPE_TEMPORAL")])
    oracle = OracleScorer({"wake me at 6": "IN:CREATE_ALARM", "at 6": "SL:DATE_TIME"})
    served = {"alarm": ServedDomain(oracle, _inventory())}
    res = parse(tokens, None, served, psi, k=1, gold=gold)
    assert res.best.template.intent == "IN:CREATE_ALARM" and res.best.score == 1.0
    frame = res.predicted_frame()
    assert [(s.start, s.end, s.label) for s in frame.slots] == [(2, 4, "SL:DATE_TIME")]
    assert parse(tokens, None, served, psi, k=1, gold=gold).to_dict() == res.to_dict()


def test_serialization_uses_round_trippable_floats():
    c = Candidate(FrameTemplate("IN:A"), 1 / 3, ())
    text = json.dumps(c.to_dict())
    assert json.loads(text)["score"] == 1 / 3


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_blockwise_property(data):
    seed = data.draw(st.integers(0, 2 ** 32 - 1))
    span_types, labels, slot_types, ip, table = _random_instance(random.Random(seed), 3, "AB")
    prob = lambda i, l: table[(i, l)]  # noqa: E731
    got, assignment = best_assignment(span_types, labels, slot_types, ip, prob)
    assert got == oracles.brute_force_sim(ip, labels, span_types, slot_types, prob)
    assert sorted(l for _, l in assignment) == sorted(labels)
