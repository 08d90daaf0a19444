"""Immutable in-memory knowledge base with the indices the interpreter needs.

A knowledge base is a set of (subject, property, object) assertions where
subjects are entity ids and objects are entity ids, 64-bit floats, or
calendar dates. Literal objects are entities too: they can appear in value
sets, they just have no outgoing edges.

File format (UTF-8, one record per line, tab-separated):

    subject<TAB>property<TAB>object<TAB>object_kind
    @alias<TAB>surface form<TAB>entity_id

with object_kind one of ``entity``, ``number``, ``date``. Dates are written
``YYYY-MM-DD``; numbers are decimal literals that round-trip 64-bit floats
exactly (``repr`` form). Alias surface forms may contain spaces.
"""

from __future__ import annotations

import datetime
import math
import re
from pathlib import Path
from typing import Iterable, Iterator

EntityId = str
PropertyId = str
Value = str | float | datetime.date

# Canonical order inside an entity set: entity ids lexicographic, then
# numbers ascending, then dates ascending.
EntitySet = tuple[Value, ...]

Triple = tuple[EntityId, PropertyId, Value]

_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")
_OBJECT_KINDS = ("entity", "number", "date")


class KBError(Exception):
    """Base class for knowledge-base failures."""


class KBLoadError(KBError):
    """Raised for malformed knowledge-base files."""


class UnknownPropertyError(KBError):
    """Raised when a query names a property the KB does not contain."""


def value_kind(value: Value) -> str:
    """Classify a value as ``entity``, ``number``, or ``date``."""
    if isinstance(value, str):
        return "entity"
    if isinstance(value, float):
        return "number"
    if isinstance(value, datetime.date) and not isinstance(value, datetime.datetime):
        return "date"
    raise TypeError(f"not a KB value: {value!r}")


_KIND_RANK = {"entity": 0, "number": 1, "date": 2}


def _sort_key(value: Value):
    return (_KIND_RANK[value_kind(value)], value)


def canon(values: Iterable[Value]) -> EntitySet:
    """Deduplicate and order values canonically (set semantics, stable text)."""
    return tuple(sorted(set(values), key=_sort_key))


def check_value(value) -> Value:
    """Validate a raw value, coercing plain ints to floats."""
    if isinstance(value, bool):
        raise KBError(f"not a KB value: {value!r}")
    if isinstance(value, int):
        value = float(value)
    try:
        kind = value_kind(value)
    except TypeError as exc:
        raise KBError(str(exc)) from exc
    if kind == "entity" and not value:
        raise KBError("entity ids must be non-empty")
    if kind == "number" and not math.isfinite(value):
        raise KBError(f"numbers must be finite, got {value!r}")
    return value


def format_value(value: Value) -> str:
    kind = value_kind(value)
    if kind == "entity":
        return value
    if kind == "number":
        return repr(value)
    return value.isoformat()


def parse_value(text: str, kind: str) -> Value:
    if kind == "entity":
        if not text:
            raise KBError("empty entity id")
        return text
    if kind == "number":
        try:
            num = float(text)
        except ValueError as exc:
            raise KBError(f"bad number literal {text!r}") from exc
        if not math.isfinite(num):
            raise KBError(f"numbers must be finite, got {text!r}")
        return num
    if kind == "date":
        if not _DATE_RE.match(text):
            raise KBError(f"bad date literal {text!r} (want YYYY-MM-DD)")
        try:
            return datetime.date.fromisoformat(text)
        except ValueError as exc:
            raise KBError(f"bad date literal {text!r}") from exc
    raise KBError(f"unknown object_kind {kind!r}")


class KnowledgeBase:
    """Triple store with forward and subject-property indices.

    Immutable after construction; all query methods are pure, so a single
    instance can serve any number of concurrent readers. Query results for
    repeated value sets are memoized internally (the memo never changes an
    answer, it only skips recomputation).
    """

    def __init__(self, triples: Iterable[Triple], aliases: dict[str, EntityId] | None = None):
        tset: set[Triple] = set()
        for subject, prop, obj in triples:
            if not isinstance(subject, str) or not subject:
                raise KBError(f"bad subject {subject!r}")
            if not isinstance(prop, str) or not prop:
                raise KBError(f"bad property {prop!r}")
            tset.add((subject, prop, check_value(obj)))

        alias_map: dict[str, EntityId] = {}
        for surface, entity in sorted((aliases or {}).items()):
            key = surface.lower()
            if not key or not entity:
                raise KBError(f"bad alias {surface!r} -> {entity!r}")
            if alias_map.get(key, entity) != entity:
                raise KBError(f"conflicting alias {surface!r}")
            alias_map[key] = entity

        self.triples: frozenset[Triple] = frozenset(tset)
        self.properties: frozenset[PropertyId] = frozenset(p for _, p, _ in tset)
        self.entities: frozenset[EntityId] = frozenset(
            {s for s, _, _ in tset}
            | {o for _, _, o in tset if isinstance(o, str)}
            | set(alias_map.values())
        )
        self.aliases: dict[str, EntityId] = alias_map

        fwd: dict[tuple[EntityId, PropertyId], set[Value]] = {}
        subj_props: dict[EntityId, set[PropertyId]] = {}
        for subject, prop, obj in sorted(tset, key=lambda t: (t[0], t[1], _sort_key(t[2]))):
            fwd.setdefault((subject, prop), set()).add(obj)
            subj_props.setdefault(subject, set()).add(prop)
        self._fwd: dict[tuple[EntityId, PropertyId], EntitySet] = {
            key: canon(objs) for key, objs in fwd.items()
        }
        self._subj_props: dict[EntityId, frozenset[PropertyId]] = {
            subj: frozenset(props) for subj, props in subj_props.items()
        }

        self._alias_tokens: dict[tuple[str, ...], EntityId] = {
            tuple(surface.split()): entity for surface, entity in alias_map.items()
        }
        self._alias_max_len = max((len(k) for k in self._alias_tokens), default=0)

        self._reach_cache: dict[EntitySet, frozenset[PropertyId]] = {}
        self._comp_cache: dict[EntitySet, frozenset[PropertyId]] = {}
        self._conn_cache: dict[tuple[EntitySet, EntitySet], frozenset[PropertyId]] = {}

    def forward(self, values: Iterable[Value], prop: PropertyId) -> EntitySet:
        """All objects reachable from ``values`` along ``prop``.

        Unknown properties are an error, distinct from an empty result.
        """
        if prop not in self.properties:
            raise UnknownPropertyError(f"unknown property {prop!r}")
        out: set[Value] = set()
        for value in values:
            if isinstance(value, str):
                out.update(self._fwd.get((value, prop), ()))
        return canon(out)

    def reachable_properties(self, values: Iterable[Value]) -> frozenset[PropertyId]:
        """Properties with at least one edge out of ``values``."""
        key = canon(values)
        cached = self._reach_cache.get(key)
        if cached is None:
            props: set[PropertyId] = set()
            for value in key:
                if isinstance(value, str):
                    props.update(self._subj_props.get(value, ()))
            cached = self._reach_cache[key] = frozenset(props)
        return cached

    def comparable_properties(self, values: Iterable[Value]) -> frozenset[PropertyId]:
        """Reachable properties whose objects from ``values`` are all numbers
        or all dates (the kinds an ordering is defined on)."""
        key = canon(values)
        cached = self._comp_cache.get(key)
        if cached is None:
            props: set[PropertyId] = set()
            for prop in self.reachable_properties(key):
                kinds = {value_kind(obj) for obj in self.forward(key, prop)}
                if kinds == {"number"} or kinds == {"date"}:
                    props.add(prop)
            cached = self._comp_cache[key] = frozenset(props)
        return cached

    def connecting_properties(
        self, values1: Iterable[Value], values2: Iterable[Value]
    ) -> frozenset[PropertyId]:
        """Properties with an edge from some value in the first set to some
        value in the second."""
        key = (canon(values1), canon(values2))
        cached = self._conn_cache.get(key)
        if cached is None:
            targets = set(key[1])
            props: set[PropertyId] = set()
            for value in key[0]:
                if not isinstance(value, str):
                    continue
                for prop in self._subj_props.get(value, ()):
                    if prop not in props and not targets.isdisjoint(self._fwd[(value, prop)]):
                        props.add(prop)
            cached = self._conn_cache[key] = frozenset(props)
        return cached

    def lines(self) -> Iterator[str]:
        """Serialized records in a deterministic order."""
        for subject, prop, obj in sorted(
            self.triples, key=lambda t: (t[0], t[1], _sort_key(t[2]))
        ):
            yield f"{subject}\t{prop}\t{format_value(obj)}\t{value_kind(obj)}"
        for surface, entity in sorted(self.aliases.items()):
            yield f"@alias\t{surface}\t{entity}"


def save_kb(kb: KnowledgeBase, path: str | Path) -> None:
    Path(path).write_text("".join(line + "\n" for line in kb.lines()), encoding="utf-8")


def load_kb(path: str | Path) -> KnowledgeBase:
    """Load a knowledge base file. Line order never affects the result;
    duplicate triples collapse."""
    triples: list[Triple] = []
    aliases: dict[str, EntityId] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            try:
                if fields[0] == "@alias":
                    if len(fields) != 3:
                        raise KBError("alias lines need @alias, surface, entity_id")
                    _, surface, entity = fields
                    key = surface.lower()
                    if not key or not entity:
                        raise KBError("empty alias surface or target")
                    if aliases.get(key, entity) != entity:
                        raise KBError(f"conflicting alias {surface!r}")
                    aliases[key] = entity
                else:
                    if len(fields) != 4:
                        raise KBError("triple lines need subject, property, object, object_kind")
                    subject, prop, obj_text, kind = fields
                    if kind not in _OBJECT_KINDS:
                        raise KBError(f"unknown object_kind {kind!r}")
                    if not subject or not prop:
                        raise KBError("empty subject or property")
                    triples.append((subject, prop, parse_value(obj_text, kind)))
            except KBError as exc:
                raise KBLoadError(f"{path}:{lineno}: {exc}") from exc
    return KnowledgeBase(triples, aliases)


def resolve_entities(
    kb: KnowledgeBase, words: list[str]
) -> list[tuple[tuple[int, int], EntityId]]:
    """Greedy longest-match alias resolution over lowercase token spans.

    Scans left to right; matched spans do not overlap. Span bounds are
    half-open token indices into ``words``.
    """
    lowered = [w.lower() for w in words]
    found: list[tuple[tuple[int, int], EntityId]] = []
    i = 0
    while i < len(lowered):
        hit = None
        longest = min(kb._alias_max_len, len(lowered) - i)
        for length in range(longest, 0, -1):
            entity = kb._alias_tokens.get(tuple(lowered[i : i + length]))
            if entity is not None:
                hit = (length, entity)
                break
        if hit is None:
            i += 1
        else:
            found.append(((i, i + hit[0]), hit[1]))
            i += hit[0]
    return found
