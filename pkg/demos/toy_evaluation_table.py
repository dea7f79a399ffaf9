"""
Leave-one-domain-out evaluation on the toy corpus
=================================================

Each domain in turn plays the new domain: the coarse parser is trained on
the others, the head sees only a few example texts per label, and the held
out test split is parsed. The table mirrors the usual four rows; the
baseline comparison follows.
"""
from openfsp.evalharness import EvalConfig, format_table, run_loo
from openfsp.toy import generate_toy_corpus

corpus = generate_toy_corpus()
print(f"{len(corpus)} utterances, domains {sorted({r.domain for r in corpus})}")

standard = run_loo(EvalConfig(examples_per_label=50), corpus)
golden = run_loo(EvalConfig(examples_per_label=50, setting="golden_parse"), corpus)

# Recall@3 and intent accuracy are read from the standard run.
rows = {"standard": standard, "golden_parse": golden,
        "recall_at_3": standard, "intent_acc": standard}
print(format_table(rows))
print("errors by kind:", standard.errors)

# Baselines, frame accuracy averaged over domains and 3 seeds.
for name, cfg in [("fully supervised", EvalConfig(baseline="fully_supervised")),
                  ("proposed, 50 ex.", EvalConfig(examples_per_label=50)),
                  ("proposed, 5 ex.", EvalConfig(examples_per_label=5)),
                  ("w/o head", EvalConfig(baseline="wo_head")),
                  ("w/o head & type", EvalConfig(baseline="wo_head_type")),
                  ("majority vote", EvalConfig(baseline="majority_vote"))]:
    rep = run_loo(cfg, corpus)
    acc = rep.average["frame_accuracy"]
    print(f"{name:18} {100 * acc['mean']:5.1f} +- {100 * acc['std']:.1f}")
