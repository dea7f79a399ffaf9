"""Few-shot frame semantic parsing over a domain-agnostic ontology."""
__version__ = "0.1.0"
