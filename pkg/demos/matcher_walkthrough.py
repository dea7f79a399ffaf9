"""
Scoring frame templates against a coarse parse
==============================================

The coarse parse says *where* the slots are and what broad type each has.
Templates whose slot types match are scored by the mean of the intent
probability and the best one-to-one assignment of spans to slot labels.
"""
import itertools

import numpy as np

from openfsp.matcher import FrameTemplate, rank, solve_block
from openfsp.ontology import load_builtin_map, make_frame

psi = load_builtin_map()
tokens = "snooze my alarm for 10 minutes at 7 am".split()
query = make_frame("IN:INTENT", len(tokens), [(3, 6, "SL:SCOPE_TEMPORAL"),
                                              (6, 9, "SL:SCOPE_TEMPORAL")])


class Table:
    """A hand-written probability table standing in for a trained head."""
    probs = {
        " ".join(tokens): {"IN:SNOOZE_ALARM": 0.7, "IN:UPDATE_ALARM": 0.2},
        "for 10 minutes": {"SL:DURATION": 0.9, "SL:DATE_TIME": 0.1},
        "at 7 am": {"SL:DURATION": 0.05, "SL:DATE_TIME": 0.8, "SL:DATE_TIME_NEW": 0.15},
    }

    def proba(self, text):
        return self.probs.get(text, {})


inventory = [FrameTemplate("IN:SNOOZE_ALARM", ("SL:DATE_TIME", "SL:DURATION")),
             FrameTemplate("IN:UPDATE_ALARM", ("SL:DATE_TIME", "SL:DATE_TIME_NEW")),
             FrameTemplate("IN:CREATE_ALARM", ("SL:DATE_TIME",)),
             FrameTemplate("IN:GET_WEATHER", ("SL:LOCATION", "SL:DATE_TIME"))]

# Both spans are temporal, so only same-type templates with two temporal slots survive.
result = rank(query, inventory, Table(), tokens, psi)
print(f"{result.n_eligible} of {result.n_inventory} templates eligible")
for c in result.ranked:
    spans = [(" ".join(tokens[query.slots[i].start:query.slots[i].end]), label)
             for i, label in c.assignment]
    print(f"  {c.score:.4f}  {c.template.intent:16} {spans}")

# Inside a block the assignment is a small permutation search; larger blocks
# go to the Hungarian solver. Both give the same answer.
m = np.random.default_rng(0).random((8, 8))
perm = solve_block(m.tolist())
best = max(itertools.permutations(range(8)), key=lambda p: sum(m[i, p[i]] for i in range(8)))
print("8x8 block:", perm, "enumeration agrees:", tuple(best) == tuple(perm))
