"""Immutable, versioned key-value store over the project namespace.

Every write returns a new :class:`Store` whose ``parent`` is the previous
version; nothing is ever modified in place. Entries are keyed by the mount
prefix of the file they came from, and lookups descend from the longest
mounted prefix into the stored Value.
"""
import hashlib
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from types import MappingProxyType
from typing import Any, Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Set, Tuple, Union

from datamodel.records import AnnotationRecord, KeyPath, Origin, ProvenanceRecord
from datamodel.serialize import canonical_serialize, dumps_tagged, provenance_to_json, to_tagged_json
from datamodel.value import ValueMap, descend
from utils.errors import CollisionWithinCommit, KeyCollision, NotFound
from utils.logger import logger

ANALYSIS_ROOT = "analysis"

KeyLike = Union[str, KeyPath]


class StoreEntry(NamedTuple):
    value: Any
    provenance: ProvenanceRecord
    version: int


class PrecedenceOverride(NamedTuple):
    """An analysis output dropped (or masked) because user input holds the key."""
    key: KeyPath
    bundle: str
    user_key: KeyPath
    user_source: str

    def to_report(self) -> Dict[str, str]:
        return {
            "key": str(self.key),
            "bundle": self.bundle,
            "user_key": str(self.user_key),
            "user_source": self.user_source,
        }


class HistoryItem(NamedTuple):
    version: int
    value: Any
    provenance: ProvenanceRecord


def _overlaps(shorter_key: KeyPath, shorter_value: Any, longer_key: KeyPath) -> bool:
    rest = longer_key.relative_to(shorter_key)
    try:
        descend(shorter_value, rest[0])
    except KeyError:
        return False
    return True


@dataclass(frozen=True, eq=False)
class Store:
    version: int = 0
    entries: Mapping[KeyPath, StoreEntry] = field(default_factory=lambda: MappingProxyType({}))
    annotations: Tuple[AnnotationRecord, ...] = ()
    parent: Optional["Store"] = None
    precedence_overrides: Tuple[PrecedenceOverride, ...] = ()

    @classmethod
    def empty(cls) -> "Store":
        return cls()

    # ========== writes ==========

    def _child(self, entries: Mapping[KeyPath, StoreEntry], annotations: Tuple[AnnotationRecord, ...],
               overrides: Tuple[PrecedenceOverride, ...]) -> "Store":
        return Store(self.version + 1, MappingProxyType(dict(entries)), annotations, self, overrides)

    def commit(self, entries: Iterable[Sequence[Any]]) -> "Store":
        """Return a new version holding ``entries`` on top of this one.

        ``entries`` are ``(key, value, provenance)`` triples. A key repeated
        within one commit is an error. Against earlier versions, a key that
        overlaps an entry of the same origin is an error, while between user
        input and analysis output the user input always wins.

        Raises:
            CollisionWithinCommit: a key appears twice in ``entries``.
            KeyCollision: a key overlaps a same-origin entry of this version.
        """
        batch: List[Tuple[KeyPath, Any, ProvenanceRecord]] = []
        seen: Set[KeyPath] = set()
        for key, value, provenance in entries:
            key = KeyPath.parse(key)
            if key in seen:
                raise CollisionWithinCommit(key)
            seen.add(key)
            self._check_same_origin(key, value, provenance)
            batch.append((key, value, provenance))

        version = self.version + 1
        current: Dict[KeyPath, StoreEntry] = dict(self.entries)
        overrides: List[PrecedenceOverride] = []
        for key, value, provenance in batch:
            incoming = StoreEntry(value, provenance, version)
            if self._apply(current, key, incoming, overrides):
                current[key] = incoming

        for override in overrides:
            logger.warning(
                f"Precedence override: analysis '{override.bundle}' output at {override.key} "
                f"yields to user input {override.user_key} ({override.user_source})"
            )
        return self._child(current, self.annotations, self.precedence_overrides + tuple(overrides))

    def _check_same_origin(self, key: KeyPath, value: Any, provenance: ProvenanceRecord) -> None:
        for other_key, other in self.entries.items():
            if other.provenance.origin != provenance.origin:
                continue
            if (other_key == key
                    or (key.startswith(other_key) and _overlaps(other_key, other.value, key))
                    or (other_key.startswith(key) and _overlaps(key, value, other_key))):
                raise KeyCollision(key, provenance.source_path, other_key, other.provenance.source_path,
                                   provenance.origin)

    @staticmethod
    def _apply(current: Dict[KeyPath, StoreEntry], key: KeyPath, incoming: StoreEntry,
               overrides: List[PrecedenceOverride]) -> bool:
        """Resolve cross-origin conflicts for one incoming entry; False drops it."""
        incoming_is_user = incoming.provenance.origin.is_user_input
        for other_key, other in list(current.items()):
            if other.provenance.origin.is_user_input == incoming_is_user:
                continue
            if other_key == key:
                pass
            elif key.startswith(other_key):
                if not _overlaps(other_key, other.value, key):
                    continue
            elif other_key.startswith(key):
                if not _overlaps(key, incoming.value, other_key):
                    continue
            else:
                continue

            user_key, user = (key, incoming) if incoming_is_user else (other_key, other)
            analysis_key, analysis = (other_key, other) if incoming_is_user else (key, incoming)
            overrides.append(PrecedenceOverride(analysis_key, analysis.provenance.origin.bundle or "",
                                                user_key, user.provenance.source_path))
            # an analysis entry at or below the user key would win the longest-prefix lookup
            if len(analysis_key) >= len(user_key):
                if incoming_is_user:
                    del current[other_key]
                else:
                    return False
        return True

    def merge_analysis_outputs(self, bundle: str, outputs: Iterable[Sequence[Any]]) -> "Store":
        """Mount ``outputs`` under ``analysis.<bundle>`` as a new version.

        Each output is ``(relative key, value)`` or ``(relative key, value,
        provenance)``. An empty list still produces a new version.
        """
        mount = KeyPath.of(ANALYSIS_ROOT, bundle)
        origin = Origin.analysis_output(bundle)
        sequence = self.last_sequence
        batch = []
        for output in outputs:
            relative, value = KeyPath.parse(output[0]), output[1]
            sequence += 1
            if len(output) > 2 and output[2] is not None:
                provenance = replace(output[2], origin=origin, load_sequence=sequence)
            else:
                digest = "sha256:" + hashlib.sha256(canonical_serialize(value)).hexdigest()
                provenance = ProvenanceRecord(str(mount.child(*relative.segments)), None, digest, origin, sequence)
            batch.append((mount.child(*relative.segments), value, provenance))
        store = self.commit(batch)
        logger.debug(f"Merged {len(batch)} outputs of bundle '{bundle}' as version {store.version}")
        return store

    def attach_annotations(self, annotations: Iterable[AnnotationRecord]) -> "Store":
        """New version with ``annotations`` appended; entries are shared unchanged."""
        return self._child(self.entries, self.annotations + tuple(annotations), self.precedence_overrides)

    # ========== reads ==========

    @cached_property
    def _children(self) -> Dict[KeyPath, Tuple[str, ...]]:
        children: Dict[KeyPath, Set[str]] = {}
        for key in self.entries:
            for n in range(1, len(key)):
                children.setdefault(KeyPath(key.segments[:n]), set()).add(key.segments[n])
        return {k: tuple(sorted(v)) for k, v in children.items()}

    @cached_property
    def last_sequence(self) -> int:
        return max((e.provenance.load_sequence for e in self.entries.values()), default=0)

    def resolve_entry(self, key: KeyLike) -> Optional[Tuple[KeyPath, StoreEntry]]:
        """The entry whose mount prefix is the longest prefix of ``key``."""
        key = KeyPath.parse(key)
        for prefix in key.prefixes():
            entry = self.entries.get(prefix)
            if entry is not None:
                return prefix, entry
        return None

    def _node(self, key: KeyPath) -> Any:
        entry = self.entries.get(key)
        children = self._children.get(key, ())
        if entry is None:
            return ValueMap((name, self._node(key.child(name))) for name in children)
        if not children or not isinstance(entry.value, ValueMap):
            return entry.value
        merged = dict(entry.value)
        for name in children:
            merged[name] = self._node(key.child(name))
        return ValueMap(merged)

    def get(self, key: KeyLike) -> Any:
        """Resolve ``key`` to a Value.

        The longest mounted prefix is found and the remaining segments descend
        through Maps, Sequences, Table columns/rows and Markdown. A key naming
        a directory returns a Map of its children.

        Raises:
            NotFound: carries the deepest prefix of ``key`` that did resolve.
        """
        key = KeyPath.parse(key)
        resolved = self.resolve_entry(key)
        if resolved is not None:
            prefix, _ = resolved
            current = self._node(prefix)
            rest = key.relative_to(prefix)
            for depth, segment in enumerate(rest):
                try:
                    current = descend(current, segment)
                except KeyError:
                    nearest = KeyPath(prefix.segments + rest[:depth])
                    raise NotFound(key, str(nearest)) from None
            return current
        if key in self._children:
            return self._node(key)
        nearest = next((p for p in key.prefixes() if p in self._children), None)
        raise NotFound(key, str(nearest) if nearest else "")

    def has(self, key: KeyLike) -> bool:
        try:
            self.get(key)
        except NotFound:
            return False
        return True

    def provenance(self, key: KeyLike) -> Optional[ProvenanceRecord]:
        resolved = self.resolve_entry(key)
        return resolved[1].provenance if resolved else None

    def annotations_for(self, key: KeyLike) -> Tuple[AnnotationRecord, ...]:
        """Annotations targeting ``key`` or anything below it."""
        key = KeyPath.parse(key)
        return tuple(a for a in self.annotations if a.target.startswith(key))

    def unresolved_annotations(self) -> List[AnnotationRecord]:
        return [a for a in self.annotations if not self.has(a.target)]

    def history(self, key: KeyLike) -> List[HistoryItem]:
        """Versions at which the entry resolving ``key`` changed, ascending."""
        key = KeyPath.parse(key)
        chain: List[Store] = []
        store: Optional[Store] = self
        while store is not None:
            chain.append(store)
            store = store.parent
        items: List[HistoryItem] = []
        last: Optional[StoreEntry] = None
        for store in reversed(chain):
            resolved = store.resolve_entry(key)
            if resolved is None or resolved[1] is last:
                continue
            last = resolved[1]
            try:
                value = store.get(key)
            except NotFound:
                continue
            items.append(HistoryItem(last.version, value, last.provenance))
        return items

    def keys(self) -> List[KeyPath]:
        return sorted(self.entries)

    def top_level_names(self) -> Tuple[str, ...]:
        return tuple(sorted({k.head for k in self.entries}))

    def snapshot(self) -> ValueMap:
        """The whole store as one nested Map."""
        return ValueMap((name, self.get(KeyPath.of(name))) for name in self.top_level_names())

    def canonical_bytes(self) -> bytes:
        return canonical_serialize(self.snapshot())

    def to_json(self) -> str:
        data = {
            "version": self.version,
            "entries": {
                str(key): {
                    "value": to_tagged_json(entry.value),
                    "provenance": provenance_to_json(entry.provenance),
                    "version": entry.version,
                }
                for key, entry in self.entries.items()
            },
            "annotations": [to_tagged_json(a) for a in self.annotations],
            "precedence_overrides": [o.to_report() for o in self.precedence_overrides],
        }
        return dumps_tagged(data)

    def dump(self, path: Path) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(self.to_json())
        logger.info(f"Store version {self.version} dumped to {path}")
        return path


__all__ = ["Store", "StoreEntry", "PrecedenceOverride", "HistoryItem", "ANALYSIS_ROOT"]
