import copy
import json
from pathlib import Path

import pytest

from openfsp.embedding import HashedProvider
from openfsp.errors import (DuplicateTemplate, MissingDomain, MissingExamples, OntologyConflict,
                            SchemaError, UnknownAgnosticType)
from openfsp.registry import (Registry, build_inventory_from_corpus, register_domain,
                              spec_from_dict, template_counts)

COFFEE = Path(__file__).resolve().parents[1] / "demos" / "data" / "coffee.json"


@pytest.fixture
def coffee():
    return json.loads(COFFEE.read_text())


def test_coffee_spec_expands(coffee, psi):
    spec, psi2 = register_domain(coffee, psi)
    # 4 optional-subset templates for ORDER_COFFEE, 4 for CANCEL_ORDER, 1 for status
    assert len(spec.templates) == 9
    assert psi2["SL:DRINK_NAME"] == "SL:DELIVERABLE"
    assert all("SL:DRINK_NAME" in t.slot_labels for t in spec.templates
               if t.intent == "IN:ORDER_COFFEE")
    assert len(psi2) == len(psi) + 1  # AMOUNT, DATE_TIME, ORDINAL already in the table


def test_schema_errors(coffee):
    bad = copy.deepcopy(coffee)
    bad["intents"][0]["slots"][0]["agnostic_type"] = "SL:FLAVOUR"
    with pytest.raises(UnknownAgnosticType):
        spec_from_dict(bad)
    bad = copy.deepcopy(coffee)
    bad["intents"].append(copy.deepcopy(bad["intents"][2]))
    with pytest.raises(DuplicateTemplate):
        spec_from_dict(bad)
    with pytest.raises(SchemaError):
        spec_from_dict({"name": "x"})
    with pytest.raises(SchemaError):
        spec_from_dict({"name": "x", "intents": [{"name": "ORDER"}]})
    bad = copy.deepcopy(coffee)
    bad["intents"][1]["slots"][1]["agnostic_type"] = "SL:NUMS"
    with pytest.raises(OntologyConflict):
        spec_from_dict(dict(bad, intents=bad["intents"] + [{
            "name": "IN:Z", "slots": [{"name": "SL:ORDINAL", "agnostic_type": "SL:SCOPE_DISAM"}]}]))


def test_builtin_conflict_rejected(coffee, psi):
    bad = copy.deepcopy(coffee)
    bad["intents"][0]["slots"][1]["agnostic_type"] = "SL:DELIVERABLE"  # SL:AMOUNT is NUMS
    with pytest.raises(OntologyConflict):
        register_domain(bad, psi)


def test_missing_examples_names_label(coffee):
    bad = copy.deepcopy(coffee)
    del bad["intents"][1]["slots"][1]["examples"]
    reg = Registry()
    reg.register(bad)
    with pytest.raises(MissingExamples, match="SL:ORDINAL"):
        reg.finalize("coffee", provider=HashedProvider())
    with pytest.raises(MissingDomain):
        reg.finalize("tea")


def test_finalize_deterministic_and_round_trip(coffee, tmp_path):
    a, b = Registry(), Registry()
    a.register(coffee)
    b.register(coffee)
    sa = a.finalize("coffee", provider=HashedProvider())
    sb = b.finalize("coffee", provider=HashedProvider())
    assert sa.head == sb.head
    a.save(tmp_path)
    loaded = Registry.load(tmp_path)
    assert loaded.domains["coffee"] == sa
    assert loaded.domains["coffee"].head.weights.tobytes() == sa.head.weights.tobytes()
    served = loaded.served()
    p = served["coffee"].scorer.proba("get me a latte")
    assert max(p, key=p.get) == "IN:ORDER_COFFEE"


def test_reregister_bumps_version(coffee):
    reg = Registry()
    assert reg.register(coffee).version == 1
    assert reg.register(coffee).version == 2
    assert reg.domains["coffee"].head is None


def test_cross_domain_conflict(coffee):
    reg = Registry()
    reg.register(coffee)
    other = {"name": "tea", "intents": [{"name": "IN:ORDER_TEA", "examples": ["tea please"],
             "slots": [{"name": "SL:DRINK_NAME", "agnostic_type": "SL:SCOPE_LOC"}]}]}
    with pytest.raises(OntologyConflict):
        reg.register(other)
    assert set(reg.domains) == {"coffee"}


def test_unfinalized_not_served(coffee):
    reg = Registry()
    reg.register(coffee)
    assert reg.served() == {}


def test_inventory_from_corpus(toy):
    assert build_inventory_from_corpus("alarm", []) == []
    inv = build_inventory_from_corpus("alarm", toy)
    counts = template_counts("alarm", toy)
    assert len(inv) == len(counts)
    assert [t.key for t in inv] == sorted(counts)
    assert all(t.domain == "alarm" for t in inv)
