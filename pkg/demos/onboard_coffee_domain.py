"""
Onboarding a new domain from a spec file
========================================

A developer describes a coffee-ordering domain as intents, slots and a
handful of example texts per label (demos/data/coffee.json). Each slot is
tied to one of the shared coarse slot types. The domain needs no annotated
parses: a parser trained on other domains supplies the coarse frame, and the
coffee head picks the matching template.
"""
import tempfile
from pathlib import Path

from openfsp.dap_tagger import train_tagger
from openfsp.dataset import select
from openfsp.matcher import parse
from openfsp.registry import Registry
from openfsp.toy import generate_toy_corpus

SPEC = Path(__file__).parent / "data" / "coffee.json"

# Register the spec: schema checks, map extension, template expansion.
reg = Registry()
spec = reg.register(SPEC)
print(f"{spec.name}: {len(spec.templates)} templates")
for t in spec.templates:
    print("   ", t.intent, list(t.slot_labels))

# Train the domain head on the example texts (hashed embeddings by default).
spec = reg.finalize("coffee")
print("head labels:", spec.head.labels, f"final loss {spec.head.losses[-1]:.3f}")

# The coarse parser never saw coffee: it is trained on the alarm/reminder toy data.
toy = select(generate_toy_corpus(), split="train")
tagger = train_tagger(toy, reg.psi, epochs=5, seed=0)

served = reg.served()
for text in ["get me a latte", "order a latte at noon", "cancel the last order",
             "cancel my order"]:
    result = parse(text.split(), tagger, served, reg.psi, k=3)
    frame = result.predicted_frame()
    slots = [(" ".join(text.split()[s.start:s.end]), s.label) for s in frame.slots]
    print(f"{text!r:28} -> {frame.intent.label} {slots}  score={result.best.score:.3f}")

# Registries persist as one JSON file per domain plus a manifest.
with tempfile.TemporaryDirectory() as root:
    reg.save(root)
    again = Registry.load(root)
    print("round trip equal:", again.domains["coffee"] == spec)
