"""Replayable primitive deltas and the copy-on-write transaction builder.

Every state change an operator makes is expressed as a serializable delta.
The transaction applies each delta to its working copy the moment it is
recorded, so the committed snapshot is by construction exactly what replaying
the delta list against the prior snapshot produces.
"""

from __future__ import annotations

from typing import Optional

from .model import (
    Edge,
    EdgeKind,
    Field,
    MemoryState,
    Tier,
    Timestamp,
    Topic,
    ValueEntry,
    fresh_embedding_for,
)


class DeltaError(ValueError):
    """A delta referenced state that does not exist; indicates corruption."""


def apply_delta(state: MemoryState, delta: dict) -> None:
    """Mutate `state` in place according to one delta. Deterministic."""
    kind = delta["kind"]
    if kind == "topic_created":
        tid = delta["id"]
        if tid in state.topics:
            raise DeltaError(f"topic already exists: {tid}")
        topic = Topic(id=tid, title=delta["title"], summary=delta["summary"], embedding=None)
        topic.embedding = fresh_embedding_for(topic)
        state.topics[tid] = topic
    elif kind == "topic_removed":
        _topic(state, delta["id"])
        del state.topics[delta["id"]]
        for key in [k for k, e in state.edges.items() if e.src == delta["id"] or e.dst == delta["id"]]:
            del state.edges[key]
        state.revision_queue = {(t, c) for t, c in state.revision_queue if t != delta["id"]}
    elif kind == "topic_archived":
        topic = _topic(state, delta["id"])
        topic.archived = True
        topic.merged_into = delta.get("merged_into")
    elif kind == "field_created":
        topic = _topic(state, delta["topic"])
        if delta["field"] in topic.fields:
            raise DeltaError(f"field already exists: {delta['topic']}.{delta['field']}")
        topic.fields[delta["field"]] = Field(
            name=delta["field"],
            entity_tag=delta.get("entity_tag"),
            salience=delta["salience"],
            tier=Tier(delta["tier"]),
            last_access=delta["last_access"],
        )
    elif kind == "field_removed":
        topic = _topic(state, delta["topic"])
        _field(topic, delta["field"])
        del topic.fields[delta["field"]]
    elif kind == "field_installed":
        topic = _topic(state, delta["topic"])
        installed = Field.from_dict(delta["payload"])
        topic.fields[installed.name] = installed
    elif kind == "entry_appended":
        f = _field(_topic(state, delta["topic"]), delta["field"])
        f.history.append(ValueEntry.from_dict(delta["entry"]))
    elif kind == "entry_flags":
        f = _field(_topic(state, delta["topic"]), delta["field"])
        idx = delta["index"]
        if idx >= len(f.history):
            raise DeltaError(f"entry index out of range: {delta['topic']}.{delta['field']}[{idx}]")
        entry = f.history[idx]
        f.history[idx] = ValueEntry(
            value=entry.value,
            at=entry.at,
            provenance=entry.provenance,
            superseded=delta["superseded"],
            compressed=delta["compressed"],
        )
    elif kind == "history_compressed":
        f = _field(_topic(state, delta["topic"]), delta["field"])
        count = delta["count"]
        if count > len(f.history):
            raise DeltaError("compression run exceeds history length")
        f.history = [ValueEntry.from_dict(delta["summary"])] + f.history[count:]
    elif kind == "salience_set":
        f = _field(_topic(state, delta["topic"]), delta["field"])
        f.salience = delta["value"]
    elif kind == "last_access_set":
        f = _field(_topic(state, delta["topic"]), delta["field"])
        f.last_access = delta["tick"]
    elif kind == "tier_set":
        f = _field(_topic(state, delta["topic"]), delta["field"])
        f.tier = Tier(delta["tier"])
    elif kind == "embedding_refresh":
        topic = _topic(state, delta["topic"])
        topic.embedding = fresh_embedding_for(topic)
    elif kind == "edge_added":
        edge = Edge(delta["src"], delta["dst"], EdgeKind(delta["edge_kind"]), Timestamp(delta["tick"]))
        if edge.src == edge.dst:
            raise DeltaError("self-loop edge")
        if edge.src not in state.topics or edge.dst not in state.topics:
            raise DeltaError(f"edge endpoint missing: {edge.src} -> {edge.dst}")
        state.edges[edge.key()] = edge
    elif kind == "edge_removed":
        key = (delta["src"], delta["dst"], delta["edge_kind"])
        if key in state.edges:
            del state.edges[key]
    elif kind == "flag_added":
        if delta["topic"] not in state.topics:
            raise DeltaError(f"flag for unknown topic: {delta['topic']}")
        state.revision_queue.add((delta["topic"], delta["cause"]))
    elif kind == "flag_removed":
        state.revision_queue = {(t, c) for t, c in state.revision_queue if t != delta["topic"]}
    else:
        raise DeltaError(f"unknown delta kind: {kind}")


def _topic(state: MemoryState, tid: str) -> Topic:
    topic = state.topics.get(tid)
    if topic is None:
        raise DeltaError(f"unknown topic: {tid}")
    topic._canonical_cache = None  # content is about to change
    return topic


def _field(topic: Topic, name: str) -> Field:
    f = topic.fields.get(name)
    if f is None:
        raise DeltaError(f"unknown field: {topic.id}.{name}")
    return f


class Txn:
    """Copy-on-write working state plus the delta log that produced it."""

    def __init__(self, base: MemoryState):
        self.base = base
        self.state = base.shallow_clone()
        self.deltas: list[dict] = []
        self._owned: set[str] = set()

    def _own(self, topic_id: str) -> None:
        if topic_id not in self._owned and topic_id in self.state.topics:
            self.state.topics[topic_id] = self.state.topics[topic_id].clone()
            self._owned.add(topic_id)

    def _record(self, delta: dict) -> None:
        for key in ("topic", "id", "src", "dst"):
            tid = delta.get(key)
            if tid is not None and delta["kind"] != "topic_created":
                self._own(tid)
        if delta["kind"] == "topic_created":
            self._owned.add(delta["id"])
        apply_delta(self.state, delta)
        self.deltas.append(delta)

    # -- mutators ---------------------------------------------------------

    def create_topic(self, topic_id: str, title: str, summary: str) -> None:
        self._record({"kind": "topic_created", "id": topic_id, "title": title, "summary": summary})

    def remove_topic(self, topic_id: str) -> None:
        self._record({"kind": "topic_removed", "id": topic_id})

    def archive_topic(self, topic_id: str, merged_into: Optional[str] = None) -> None:
        self._record({"kind": "topic_archived", "id": topic_id, "merged_into": merged_into})

    def create_field(
        self,
        topic_id: str,
        name: str,
        entity_tag: Optional[str],
        salience: float,
        last_access: int,
        tier: Tier = Tier.ACTIVE,
    ) -> None:
        self._record(
            {
                "kind": "field_created",
                "topic": topic_id,
                "field": name,
                "entity_tag": entity_tag,
                "salience": salience,
                "tier": tier.value,
                "last_access": last_access,
            }
        )

    def remove_field(self, topic_id: str, name: str) -> None:
        self._record({"kind": "field_removed", "topic": topic_id, "field": name})

    def install_field(self, topic_id: str, payload: Field) -> None:
        self._record({"kind": "field_installed", "topic": topic_id, "payload": payload.to_dict()})

    def append_entry(self, topic_id: str, name: str, entry: ValueEntry) -> None:
        self._record({"kind": "entry_appended", "topic": topic_id, "field": name, "entry": entry.to_dict()})

    def set_entry_flags(self, topic_id: str, name: str, index: int, superseded: bool, compressed: bool) -> None:
        self._record(
            {
                "kind": "entry_flags",
                "topic": topic_id,
                "field": name,
                "index": index,
                "superseded": superseded,
                "compressed": compressed,
            }
        )

    def compress_history(self, topic_id: str, name: str, count: int, summary: ValueEntry) -> None:
        self._record(
            {
                "kind": "history_compressed",
                "topic": topic_id,
                "field": name,
                "count": count,
                "summary": summary.to_dict(),
            }
        )

    def set_salience(self, topic_id: str, name: str, value: float) -> None:
        self._record({"kind": "salience_set", "topic": topic_id, "field": name, "value": value})

    def set_last_access(self, topic_id: str, name: str, tick: int) -> None:
        self._record({"kind": "last_access_set", "topic": topic_id, "field": name, "tick": tick})

    def set_tier(self, topic_id: str, name: str, tier: Tier) -> None:
        self._record({"kind": "tier_set", "topic": topic_id, "field": name, "tier": tier.value})

    def refresh_embedding(self, topic_id: str) -> None:
        self._record({"kind": "embedding_refresh", "topic": topic_id})

    def add_edge(self, src: str, dst: str, kind: EdgeKind, tick: int) -> None:
        self._record({"kind": "edge_added", "src": src, "dst": dst, "edge_kind": kind.value, "tick": tick})

    def remove_edge(self, src: str, dst: str, kind: EdgeKind) -> None:
        self._record({"kind": "edge_removed", "src": src, "dst": dst, "edge_kind": kind.value})

    def add_flag(self, topic_id: str, cause: str) -> None:
        self._record({"kind": "flag_added", "topic": topic_id, "cause": cause})

    def remove_flag(self, topic_id: str) -> None:
        self._record({"kind": "flag_removed", "topic": topic_id})
