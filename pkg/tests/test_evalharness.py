from collections import Counter

import pytest

from openfsp.embedding import HashedProvider
from openfsp.errors import LengthMismatch, MissingDomain, NoEligibleFrame
from openfsp.evalharness import (METRICS, EvalConfig, EvalReport, baseline_majority_vote,
                                 baseline_wo_head, baseline_wo_head_type, check_identities,
                                 classify_error, curve_csv, format_table, majority_ranking,
                                 metric_frame_accuracy, metric_intent_accuracy, metric_mrr,
                                 metric_recall_at_k, run_loo)
from openfsp.matcher import Candidate, FrameTemplate, MatchResult
from openfsp.ontology import make_frame


def _result(keys):
    cands = [Candidate(FrameTemplate(i, s), 1.0 - n / 10, ()) for n, (i, s) in enumerate(keys)]
    return MatchResult(cands, make_frame("IN:INTENT", 1, []), len(cands), len(cands))


GOLD = ("IN:G", ())
OTHER = [("IN:A", ()), ("IN:B", ()), ("IN:C", ())]


def test_mrr_and_recall_example():
    results = [_result([GOLD] + OTHER), _result(OTHER[:1] + [GOLD]), _result(OTHER + [GOLD])]
    golds = [GOLD] * 3
    assert metric_mrr(results, golds) == pytest.approx((1 + 1 / 2 + 1 / 4) / 3, abs=1e-12)
    assert metric_mrr(results, golds) == pytest.approx(0.58333, abs=1e-5)
    assert metric_recall_at_k(results, golds, 1) == pytest.approx(1 / 3)
    assert metric_recall_at_k(results, golds, 3) == pytest.approx(2 / 3)
    assert metric_recall_at_k(results + [None], golds + [GOLD], 10 ** 9) == 0.75
    assert metric_intent_accuracy(results, ["IN:G", "IN:A", "IN:A"]) == 1.0


def test_length_mismatch():
    with pytest.raises(LengthMismatch):
        metric_mrr([None], [GOLD, GOLD])
    with pytest.raises(LengthMismatch):
        metric_frame_accuracy([], [])
    with pytest.raises(ValueError):
        metric_recall_at_k([None], [GOLD], 0)


def test_frame_accuracy_is_exact_match():
    gold = make_frame("IN:CREATE_ALARM", 3, [(1, 3, "SL:DATE_TIME")])
    same = make_frame("IN:CREATE_ALARM", 3, [(1, 3, "SL:DATE_TIME")])
    shifted = make_frame("IN:CREATE_ALARM", 3, [(2, 3, "SL:DATE_TIME")])
    assert metric_frame_accuracy([same, shifted, None], [gold] * 3) == pytest.approx(1 / 3)


def test_majority_vote_counts_and_ties():
    stats = Counter({("IN:A", ("SL:X",)): 5, ("IN:B", ("SL:Y",)): 5, ("IN:C", ("SL:X",)): 9,
                     ("IN:D", ()): 2})
    q1 = make_frame("IN:INTENT", 2, [(0, 1, "SL:DELIVERABLE")])
    assert baseline_majority_vote(q1, stats).key == ("IN:C", ("SL:X",))
    ranking = majority_ranking(q1, stats)
    assert [c.template.intent for c in ranking.ranked] == ["IN:C", "IN:A", "IN:B"]
    assert baseline_majority_vote(make_frame("IN:INTENT", 1, []), stats).intent == "IN:D"
    with pytest.raises(NoEligibleFrame):
        majority_ranking(make_frame("IN:INTENT", 4, [(0, 1, "SL:NUMS"), (1, 2, "SL:NUMS")]), stats)


def test_wo_head_cosine_extremes(psi):
    p = HashedProvider()
    inv = [FrameTemplate("IN:CREATE_ALARM"), FrameTemplate("IN:GET_WEATHER")]
    examples = [("set an alarm", "IN:CREATE_ALARM"), ("qqqq", "IN:GET_WEATHER")]
    res = baseline_wo_head(make_frame("IN:INTENT", 3, []), inv, examples, p,
                           "set an alarm".split(), psi)
    assert res.best.template.intent == "IN:CREATE_ALARM"
    assert res.best.score == pytest.approx(1.0, abs=1e-12)
    assert res.ranked[1].score == pytest.approx(0.5, abs=1e-12)


def test_wo_head_type_is_superset(psi, toy):
    from openfsp.dap_tagger import golden_parse
    from openfsp.registry import build_inventory_from_corpus
    p = HashedProvider()
    inv = build_inventory_from_corpus("alarm", toy)
    examples = [("set an alarm", "IN:CREATE_ALARM"), ("at 6 am", "SL:DATE_TIME")]
    for r in [r for r in toy if r.domain == "alarm"][:40]:
        q = golden_parse(r, psi)
        typed = baseline_wo_head(q, inv, examples, p, r.tokens, psi)
        untyped = baseline_wo_head_type(q, inv, examples, p, r.tokens, psi)
        assert set(typed.keys()) <= set(untyped.keys())
        assert untyped.n_eligible >= typed.n_eligible


def test_classify_error(psi):
    gold = make_frame("IN:CREATE_ALARM", 4, [(2, 4, "SL:DATE_TIME")])
    assert classify_error(gold, gold, psi) is None
    assert classify_error(None, gold, psi) == "no_parse"
    assert classify_error(make_frame("IN:CREATE_ALARM", 4, []), gold, psi) == "wrong_slot_count"
    assert classify_error(make_frame("IN:CREATE_ALARM", 4, [(2, 4, "SL:ALARM_NAME")]), gold,
                          psi) == "wrong_agnostic_type"
    assert classify_error(make_frame("IN:GET_ALARM", 4, [(2, 4, "SL:DATE_TIME")]), gold,
                          psi) == "wrong_intent"
    assert classify_error(make_frame("IN:CREATE_ALARM", 4, [(2, 4, "SL:DURATION")]), gold,
                          psi) == "wrong_slot_label"


def test_config_validation():
    with pytest.raises(ValueError):
        EvalConfig(setting="nope")
    with pytest.raises(ValueError):
        EvalConfig(seeds=())
    with pytest.raises(ValueError):
        EvalConfig(examples_per_label=0)


@pytest.fixture(scope="module")
def one_seed(toy):
    cfg = EvalConfig(examples_per_label=10, seeds=(1,), tagger_epochs=2)
    return run_loo(cfg, toy)


def test_one_seed_run_populated(one_seed):
    rep = one_seed
    assert rep.domains == ["alarm", "reminder"]
    for d in rep.domains:
        assert set(rep.per_domain[d]) == set(METRICS)
        assert rep.n_test[d] == 200
        assert rep.inventory_size[d] > 0
    assert check_identities(rep) == []
    assert 0.0 < rep.mean("frame_accuracy") <= 1.0


def test_report_round_trip_and_determinism(toy, one_seed):
    again = run_loo(EvalConfig(examples_per_label=10, seeds=(1,), tagger_epochs=2), toy)
    assert again.to_json() == one_seed.to_json()
    back = EvalReport.from_dict(__import__("json").loads(one_seed.to_json()))
    assert back.to_json() == one_seed.to_json()


def test_rendering(one_seed):
    table = format_table({"standard": one_seed, "recall_at_3": one_seed})
    lines = table.splitlines()
    assert lines[0].split(" | ")[0].strip() == "Eval. Setting"
    assert lines[2].startswith("Standard") and lines[3].startswith("+ Recall@3")
    assert f"{100 * one_seed.mean('frame_accuracy'):.1f}" in lines[2]
    csv = curve_csv([one_seed]).splitlines()
    assert csv[0] == "baseline,examples_per_label,setting,mean,std"
    assert csv[1].startswith("proposed,10,standard,")
    assert format_table({}) == ""


def test_unknown_domain(toy):
    with pytest.raises(MissingDomain):
        run_loo(EvalConfig(seeds=(1,), domains=("weather",)), toy)
