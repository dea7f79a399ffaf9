"""Onboarding developer-declared domains: spec files -> templates, map entries, heads.

A domain spec file looks like::

    {"name": "coffee",
     "intents": [{"name": "IN:ORDER_COFFEE",
                  "examples": ["get me a latte", ...],
                  "slots": [{"name": "SL:DRINK_NAME", "agnostic_type": "SL:DELIVERABLE",
                             "examples": ["latte", ...], "required": true}]}]}

Each intent contributes one template per subset of its optional slots,
with the required slots always present.
"""
from __future__ import annotations

import json
import os
import tempfile
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import jsonschema

from .dataset import Record
from .embedding import ProviderConfig, make_provider
from .errors import (DuplicateTemplate, MissingDomain, MissingExamples, OntologyConflict,
                     SchemaError, UnknownAgnosticType)
from .head import FEW_SHOT, Head, TrainConfig, train_head
from .matcher import FrameTemplate, HeadScorer, ServedDomain
from .ontology import AGNOSTIC_SLOT_NAMES, OntologyMap, load_builtin_map

SCHEMA_VERSION = 1
MANIFEST = "manifest.json"
TAGGER_FILE = "dap_model.jsonl"

SPEC_SCHEMA = {
    "type": "object",
    "required": ["name", "intents"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string", "pattern": r"^[A-Za-z0-9_\-]+$"},
        "intents": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["name"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string", "pattern": "^IN:.+"},
                    "examples": {"type": "array", "items": {"type": "string", "minLength": 1}},
                    "slots": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["name", "agnostic_type"],
                            "additionalProperties": False,
                            "properties": {
                                "name": {"type": "string", "pattern": "^SL:.+"},
                                "agnostic_type": {"type": "string"},
                                "examples": {"type": "array",
                                             "items": {"type": "string", "minLength": 1}},
                                "required": {"type": "boolean"},
                            },
                        },
                    },
                },
            },
        },
    },
}


@dataclass
class DomainSpec:
    name: str
    templates: list[FrameTemplate]
    psi_extension: dict[str, str]
    simple_labels: dict[str, list[str]]
    head: Head | None = None
    provider: ProviderConfig | None = None
    version: int = 1

    def examples(self) -> list[tuple[str, str]]:
        return [(text, label) for label, texts in sorted(self.simple_labels.items())
                for text in texts]

    def labels(self) -> list[str]:
        out = set()
        for t in self.templates:
            out.add(t.intent)
            out.update(t.slot_labels)
        return sorted(out)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "version": self.version,
            "templates": [t.to_dict() for t in self.templates],
            "psi_extension": dict(sorted(self.psi_extension.items())),
            "simple_labels": {k: list(v) for k, v in sorted(self.simple_labels.items())},
            "head": self.head.to_dict() if self.head is not None else None,
            "provider": self.provider.to_dict() if self.provider is not None else None,
        }

    @classmethod
    def from_dict(cls, obj: Mapping) -> "DomainSpec":
        return cls(
            name=obj["name"],
            templates=[FrameTemplate.from_dict(t) for t in obj["templates"]],
            psi_extension=dict(obj["psi_extension"]),
            simple_labels={k: list(v) for k, v in obj["simple_labels"].items()},
            head=Head.from_dict(obj["head"]) if obj.get("head") else None,
            provider=ProviderConfig(**obj["provider"]) if obj.get("provider") else None,
            version=obj.get("version", 1),
        )

    def __eq__(self, other):
        if not isinstance(other, DomainSpec):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def _merge_examples(target: dict[str, list[str]], label: str, texts: Iterable[str]):
    bucket = target.setdefault(label, [])
    seen = {t.lower() for t in bucket}
    for t in texts:
        if t.lower() not in seen:
            seen.add(t.lower())
            bucket.append(t)


def spec_from_dict(obj: Mapping) -> DomainSpec:
    """Validate a spec document and expand it into a :class:`DomainSpec`."""
    try:
        jsonschema.validate(obj, SPEC_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise SchemaError(f"{'/'.join(map(str, exc.absolute_path)) or '<root>'}: {exc.message}") from None
    name = obj["name"]
    psi_ext: dict[str, str] = {}
    simple: dict[str, list[str]] = {}
    templates: list[FrameTemplate] = []
    for intent in obj["intents"]:
        _merge_examples(simple, intent["name"], intent.get("examples", []))
        required, optional = [], []
        names = Counter(s["name"] for s in intent.get("slots", []))
        dup = [n for n, c in names.items() if c > 1]
        if dup:
            raise SchemaError(f"{intent['name']}: slot {dup[0]} declared twice")
        for slot in intent.get("slots", []):
            kind = slot["agnostic_type"]
            if kind not in AGNOSTIC_SLOT_NAMES:
                raise UnknownAgnosticType(f"{slot['name']}: unknown agnostic type {kind!r}")
            if psi_ext.get(slot["name"], kind) != kind:
                raise OntologyConflict(
                    f"{slot['name']} mapped to both {psi_ext[slot['name']]} and {kind}")
            psi_ext[slot["name"]] = kind
            _merge_examples(simple, slot["name"], slot.get("examples", []))
            (required if slot.get("required", False) else optional).append(slot["name"])
        for r in range(len(optional) + 1):
            for subset in combinations(optional, r):
                templates.append(FrameTemplate(intent["name"], tuple(required) + subset, name))
    keys = Counter(t.key for t in templates)
    dups = [k for k, c in keys.items() if c > 1]
    if dups:
        raise DuplicateTemplate(f"duplicate template {dups[0][0]} {list(dups[0][1])}")
    for label in list(simple):
        if not simple[label]:
            del simple[label]
    return DomainSpec(name, templates, psi_ext, simple)


def register_domain(spec_file, psi: OntologyMap) -> tuple[DomainSpec, OntologyMap]:
    """Load and validate a spec file; returns the spec and ``psi`` extended with its slots."""
    if isinstance(spec_file, Mapping):
        obj = spec_file
    else:
        try:
            obj = json.loads(Path(spec_file).read_text(encoding="utf-8"))
        except ValueError as exc:
            raise SchemaError(f"{spec_file}: not valid JSON ({exc})") from None
    spec = spec_from_dict(obj)
    return spec, psi.extend(spec.psi_extension)


def build_inventory_from_corpus(domain: str, records: Sequence[Record]) -> list[FrameTemplate]:
    """Unique (intent, slot multiset) shapes among ``records`` of ``domain``, sorted."""
    shapes = {(r.intent, r.frame.slot_labels) for r in records if r.domain == domain}
    return [FrameTemplate(intent, slots, domain) for intent, slots in sorted(shapes)]


def template_counts(domain: str, records: Sequence[Record]) -> Counter:
    return Counter((r.intent, r.frame.slot_labels) for r in records if r.domain == domain)


def check_trainable(spec: DomainSpec):
    for label in spec.labels():
        if not spec.simple_labels.get(label):
            raise MissingExamples(f"{spec.name}: no examples for {label}")


def finalize_domain(spec: DomainSpec, cfg: TrainConfig | None, provider) -> DomainSpec:
    """Train the domain's head on its simple labels; returns a new servable spec."""
    check_trainable(spec)
    wanted = set(spec.labels())
    examples = [(t, label) for t, label in spec.examples() if label in wanted]
    head = train_head(examples, cfg or FEW_SHOT, provider)
    return DomainSpec(spec.name, list(spec.templates), dict(spec.psi_extension),
                      {k: list(v) for k, v in spec.simple_labels.items()}, head,
                      provider.config, spec.version)


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


@dataclass
class Registry:
    """A set of domains over the builtin map; persisted as one JSON file per domain."""
    root: Path | None = None
    domains: dict[str, DomainSpec] = field(default_factory=dict)
    base_map: OntologyMap = field(default_factory=load_builtin_map)

    @property
    def psi(self) -> OntologyMap:
        psi = self.base_map
        for spec in self.domains.values():
            psi = psi.extend(spec.psi_extension)
        return psi

    def register(self, spec_file) -> DomainSpec:
        spec, _ = register_domain(spec_file, OntologyMap())
        # a re-registered domain may change its own entries, nobody else's
        psi = self.base_map
        for other in self.domains.values():
            if other.name != spec.name:
                psi = psi.extend(other.psi_extension)
        psi.extend(spec.psi_extension)
        old = self.domains.get(spec.name)
        if old is not None:
            spec.version = old.version + 1
        self.domains[spec.name] = spec
        return spec

    def finalize(self, name: str, cfg: TrainConfig | None = None, provider=None) -> DomainSpec:
        if name not in self.domains:
            raise MissingDomain(f"unknown domain {name!r}")
        provider = provider or make_provider()
        spec = finalize_domain(self.domains[name], cfg, provider)
        self.domains[name] = spec
        return spec

    def served(self, providers: Mapping[str, object] | None = None) -> dict[str, ServedDomain]:
        out = {}
        for name, spec in sorted(self.domains.items()):
            if spec.head is None:
                continue
            provider = (providers or {}).get(name) or make_provider(spec.provider)
            out[name] = ServedDomain(HeadScorer(spec.head, provider), list(spec.templates))
        return out

    def save(self, root=None):
        root = Path(root or self.root)
        manifest = {"schema_version": SCHEMA_VERSION,
                    "domains": {name: {"file": f"{name}.json", "version": spec.version}
                                for name, spec in sorted(self.domains.items())}}
        for name, spec in self.domains.items():
            _atomic_write(root / f"{name}.json", json.dumps(spec.to_dict(), sort_keys=True, indent=1))
        _atomic_write(root / MANIFEST, json.dumps(manifest, sort_keys=True, indent=2))

    @classmethod
    def load(cls, root) -> "Registry":
        root = Path(root)
        reg = cls(root)
        path = root / MANIFEST
        if not path.exists():
            return reg
        manifest = json.loads(path.read_text(encoding="utf-8"))
        if manifest.get("schema_version") != SCHEMA_VERSION:
            raise SchemaError(f"unsupported registry schema {manifest.get('schema_version')!r}")
        for name, entry in sorted(manifest["domains"].items()):
            obj = json.loads((root / entry["file"]).read_text(encoding="utf-8"))
            reg.domains[name] = DomainSpec.from_dict(obj)
        reg.psi  # raises on conflicting persisted extensions
        return reg
