"""Label spaces, the domain-specific -> domain-agnostic slot map, and frame types.

Domain-specific labels follow the TopV2 naming convention (``IN:*`` for
intents, ``SL:*`` for slots). The agnostic side has eight coarse slot types
plus a single intent sentinel, ``IN:INTENT``, that every intent maps to.
"""
from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from types import MappingProxyType
from typing import Iterable, Mapping

from .errors import OntologyConflict, UnknownAgnosticType, UnknownLabel

logger = logging.getLogger(__name__)

INTENT_PREFIX = "IN:"
SLOT_PREFIX = "SL:"
AGNOSTIC_DOMAIN = "agnostic"


class LabelKind(str, Enum):
    INTENT = "intent"
    SLOT = "slot"


class AgnosticLabel(str, Enum):
    DELIVERABLE = "SL:DELIVERABLE"
    RECIPIENT = "SL:RECIPIENT"
    SCOPE_TEMPORAL = "SL:SCOPE_TEMPORAL"
    SCOPE_LOC = "SL:SCOPE_LOC"
    SCOPE_DISAM = "SL:SCOPE_DISAM"
    OTHER_OPEN_TEXT = "SL:OTHER_OPEN_TEXT"
    NUMS = "SL:NUMS"
    PROPER_NAME = "SL:PROPER_NAME"
    INTENT = "IN:INTENT"

    def __str__(self):
        return self.value


AGNOSTIC_SLOTS = tuple(a for a in AgnosticLabel if a is not AgnosticLabel.INTENT)
AGNOSTIC_SLOT_NAMES = frozenset(a.value for a in AGNOSTIC_SLOTS)


@dataclass(frozen=True)
class Label:
    kind: LabelKind
    name: str
    domain: str = AGNOSTIC_DOMAIN

    def __post_init__(self):
        if not self.name:
            raise ValueError("label name must be nonempty")
        prefix = INTENT_PREFIX if self.kind is LabelKind.INTENT else SLOT_PREFIX
        if not self.name.startswith(prefix):
            raise ValueError(f"{self.kind.value} label {self.name!r} must start with {prefix!r}")

    @classmethod
    def from_name(cls, name: str, domain: str = AGNOSTIC_DOMAIN) -> "Label":
        kind = LabelKind.INTENT if is_intent(name) else LabelKind.SLOT
        return cls(kind, name, domain)


def is_intent(name: str) -> bool:
    return name.startswith(INTENT_PREFIX)


def is_slot(name: str) -> bool:
    return name.startswith(SLOT_PREFIX)


# Rows of the published TopV2 -> agnostic table, in table order, duplicates kept.
TABLE_ROWS: tuple[tuple[str, tuple[str, ...]], ...] = (
    ("SL:DELIVERABLE", (
        "SL:TYPE_REACTION", "SL:TODO", "SL:TODO_NEW",
        "SL:METHOD_TIMER", "SL:TIMER_NAME", "SL:ALARM_NAME",
    )),
    ("SL:RECIPIENT", (
        "SL:RECIPIENT", "SL:PERSON_REMINDED_ADDED",
        "SL:PERSON_REMINDED_REMOVED", "SL:PERSON_REMINDED",
        "SL:ATTENDEE_REMOVED", "SL:ATTENDEE_ADDED",
    )),
    ("SL:SCOPE_TEMPORAL", (
        "SL:DATE_TIME", "SL:DATE_TIME_RECURRING",
        "SL:DURATION", "SL:PERIOD",
        "SL:RECURRING_DATE_TIME", "SL:TIME_ZONE",
        "SL:DATE_TIME_DEPARTURE", "SL:DATE_TIME_ARRIVAL",
        "SL:FREQUENCY", "SL:RECURRING_DATE_TIME_NEW",
        "SL:DATE_TIME_NEW", "SL:SCOPE_TEMPORAL_RECURRING",
    )),
    ("SL:SCOPE_LOC", (
        "SL:LOCATION", "SL:POINT_ON_MAP",
        "SL:LOCATION_HOME", "SL:LOCATION_USER",
        "SL:LOCATION_MODIFIER", "SL:WAYPOINT_ADDED",
        "SL:LOCATION_WORK",
    )),
    ("SL:SCOPE_DISAM", (
        "SL:ORDINAL", "SL:TYPE_CONTENT", "SL:GROUP",
        "SL:RESOURCE", "SL:CONTENT_EMOJI",
        "SL:TYPE_CONTACT", "SL:MUTUAL_EMPLOYER",
        "SL:MUTUAL_SCHOOL", "SL:TYPE_INFO",
        "SL:MUTUAL_LOCATION", "SL:CONTACT_RELATED",
        "SL:MUSIC_GENRE", "SL:UNIT_DISTANCE",
        "SL:WEATHER_TEMPERATURE_UNIT", "SL:MEASUREMENT_UNIT",
        "SL:METHOD_RETRIEVAL_REMINDER",
    )),
    ("SL:OTHER_OPEN_TEXT", (
        "SL:CATEGORY_EVENT",
        "SL:SEARCH_RADIUS", "SL:ATTRIBUTE_EVENT",
        "SL:CATEGORY_LOCATION", "SL:NAME_EVENT",
        "SL:ATTENDEE", "SL:ATTENDEE_EVENT",
        "SL:TYPE_RELATION", "SL:ORGANIZER_EVENT",
        "SL:TAG_MESSAGE", "SL:CONTENT_EXACT",
        "SL:MUSIC_TYPE", "SL:MUSIC_TRACK_TITLE",
        "SL:MUSIC_ALBUM_TITLE", "SL:MUSIC_PLAYLIST_TITLE",
        "SL:MUSIC_RADIO_ID", "SL:METHOD_TRAVEL",
        "SL:JOB", "SL:WEATHER_ATTRIBUTE",
        "SL:OBSTRUCTION_AVOID", "SL:ROAD_CONDITION_AVOID",
        "SL:ROAD_CONDITION",
    )),
    ("SL:NUMS", ("SL:AMOUNT", "SL:AGE")),
    ("SL:PROPER_NAME", (
        "SL:NAME_EVENT", "SL:CONTACT",
        "SL:ORGANIZER_EVENT", "SL:SENDER",
        "SL:MUSIC_TRACK_TITLE", "SL:MUSIC_PROVIDER_NAME",
        "SL:MUSIC_ALBUM_TITLE", "SL:MUSIC_ARTIST_NAME",
        "SL:SOURCE", "SL:DESTINATION", "SL:PATH", "SL:PATH_AVOID",
        "SL:WAYPOINT_AVOID", "SL:LOCATION_CURRENT",
        "SL:PATH_AVOID", "SL:WAYPOINT_AVOID",
        "SL:LOCATION_CURRENT", "SL:WAYPOINT",
        "SL:ATTENDEE", "SL:NAME_APP",
    )),
)

MAP_VERSION = 1
_RESOURCE = "builtin_map.json"


class OntologyMap(Mapping[str, str]):
    """Immutable many-to-one map from domain-specific slot names to agnostic slot names.

    Intent names are not stored; :func:`map_label` sends every intent to
    ``IN:INTENT``.
    """

    def __init__(self, entries: Mapping[str, str] | None = None):
        entries = dict(entries or {})
        for name, target in entries.items():
            if not is_slot(name):
                raise ValueError(f"only slot labels can be mapped, got {name!r}")
            if target not in AGNOSTIC_SLOT_NAMES:
                raise UnknownAgnosticType(f"{name!r} maps to unknown agnostic type {target!r}")
        self._entries = MappingProxyType(dict(sorted(entries.items())))

    def __getitem__(self, key):
        return self._entries[key]

    def __iter__(self):
        return iter(self._entries)

    def __len__(self):
        return len(self._entries)

    def __eq__(self, other):
        if isinstance(other, OntologyMap):
            return dict(self._entries) == dict(other._entries)
        return NotImplemented

    def __hash__(self):
        return hash(tuple(self._entries.items()))

    def __repr__(self):
        return f"OntologyMap({len(self)} entries)"

    def extend(self, entries: Mapping[str, str]) -> "OntologyMap":
        """Return a new map with ``entries`` merged in.

        Re-stating an existing entry with the same target is fine; changing
        its target raises :class:`OntologyConflict`.
        """
        merged = dict(self._entries)
        for name, target in entries.items():
            if name in merged and merged[name] != target:
                raise OntologyConflict(
                    f"{name} already maps to {merged[name]}, refusing remap to {target}")
            merged[name] = target
        return OntologyMap(merged)

    def without(self, names: Iterable[str]) -> "OntologyMap":
        names = set(names)
        return OntologyMap({k: v for k, v in self._entries.items() if k not in names})

    def to_dict(self) -> dict:
        return {"version": MAP_VERSION, "slots": dict(self._entries)}

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def resolve_rows(rows=TABLE_ROWS) -> dict[str, str]:
    """Flatten table rows to a dict; the first row a label appears in wins."""
    resolved: dict[str, str] = {}
    for target, sources in rows:
        for name in sources:
            if name not in resolved:
                resolved[name] = target
            elif resolved[name] != target:
                logger.info("conflicting map rows for %s: keeping %s, ignoring %s",
                            name, resolved[name], target)
    return resolved


def load_builtin_map() -> OntologyMap:
    payload = json.loads(resources.files("openfsp.data").joinpath(_RESOURCE).read_text("utf-8"))
    if payload.get("version") != MAP_VERSION:
        raise ValueError(f"unsupported builtin map version {payload.get('version')!r}")
    rows = tuple((target, tuple(sources)) for target, sources in payload["source_rows"])
    resolved = resolve_rows(rows)
    if resolved != payload["slots"]:
        raise ValueError("builtin map resource is inconsistent with its source rows")
    return OntologyMap(resolved)


def builtin_resource_payload() -> dict:
    """The JSON document shipped as ``openfsp/data/builtin_map.json``."""
    return {
        "version": MAP_VERSION,
        "slots": dict(sorted(resolve_rows().items())),
        "source_rows": [[target, list(sources)] for target, sources in TABLE_ROWS],
    }


def map_label(label: Label | str, psi: OntologyMap) -> AgnosticLabel:
    name = label.name if isinstance(label, Label) else label
    if isinstance(name, AgnosticLabel):
        return name
    if is_intent(name):
        return AgnosticLabel.INTENT
    if name in AGNOSTIC_SLOT_NAMES:
        return AgnosticLabel(name)
    try:
        return AgnosticLabel(psi[name])
    except KeyError:
        raise UnknownLabel(f"no agnostic mapping for {name}") from None


@dataclass(frozen=True, order=True)
class Span:
    start: int
    end: int
    label: str

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise ValueError(f"bad span geometry [{self.start}, {self.end})")

    def overlaps(self, other: "Span") -> bool:
        return self.start < other.end and other.start < self.end


@dataclass(frozen=True)
class Frame:
    intent: Span
    slots: tuple[Span, ...] = ()
    domain: str = AGNOSTIC_DOMAIN

    def __post_init__(self):
        object.__setattr__(self, "slots", tuple(sorted(self.slots)))
        if self.intent.start != 0:
            raise ValueError("intent span must start at token 0")
        for s in self.slots:
            if s.end > self.intent.end:
                raise ValueError(f"slot {s} exceeds utterance length {self.intent.end}")
        for a, b in zip(self.slots, self.slots[1:]):
            if a.overlaps(b):
                raise ValueError(f"overlapping slots {a} and {b}")

    @property
    def n_tokens(self) -> int:
        return self.intent.end

    @property
    def slot_labels(self) -> tuple[str, ...]:
        return tuple(sorted(s.label for s in self.slots))

    def template_key(self) -> tuple[str, tuple[str, ...]]:
        return (self.intent.label, self.slot_labels)

    def to_dict(self) -> dict:
        return {
            "intent": self.intent.label,
            "slots": [{"start": s.start, "end": s.end, "label": s.label} for s in self.slots],
        }


def make_frame(intent: str, n_tokens: int, slots: Iterable[tuple[int, int, str]] = (),
               domain: str = AGNOSTIC_DOMAIN) -> Frame:
    return Frame(Span(0, n_tokens, intent), tuple(Span(*s) for s in slots), domain)


def frame_signature(frame: Frame, psi: OntologyMap) -> Counter:
    """Multiset of agnostic slot types in ``frame`` (intent excluded)."""
    return Counter(map_label(s.label, psi) for s in frame.slots)

