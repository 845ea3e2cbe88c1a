"""Append-only CRUD baseline: unconditional puts, age-based eviction and
read-only retrieval.  Exists to reproduce the four failure modes of naive
record stores in differential tests against the governed engine.

The journal adapter mirrors every put/evict/query as a transition record so
the trajectory auditor can score the baseline with the same machinery.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field as dc_field
from typing import Optional

from .config import EngineConfig
from .embedding import EmbeddingVector, cosine, embed
from .engine import EngineEvent, Journal, TransitionRecord
from .model import (
    MemoryState,
    Provenance,
    Timestamp,
    ValueEntry,
    canonical_json,
    state_digest,
    state_to_dict,
)
from .operators import FactBundle, Query
from .transaction import Txn


@dataclass(frozen=True)
class Record:
    id: int
    text: str
    embedding: EmbeddingVector
    created_at: Timestamp
    # concept/field/value keep the originating fact visible to compare tooling
    concept: Optional[str] = None
    field: Optional[str] = None
    value: Optional[str] = None


@dataclass
class BaselineStore:
    capacity: int = 5
    records: list[Record] = dc_field(default_factory=list)
    next_id: int = 0

    def put(self, text: str, created_at: int, concept: Optional[str] = None,
            field: Optional[str] = None, value: Optional[str] = None) -> tuple[int, list[Record]]:
        """Append unconditionally; evict oldest beyond capacity. Returns
        (new record id, evicted records)."""
        record = Record(self.next_id, text, embed(text), Timestamp(created_at), concept, field, value)
        self.next_id += 1
        self.records.append(record)
        evicted = []
        while len(self.records) > self.capacity:
            evicted.append(self.records.pop(0))
        return record.id, evicted

    def query(self, text: str, k: int) -> list[Record]:
        """Top-k by cosine only; a pure read."""
        if k < 1:
            raise ValueError("k must be at least 1")
        query_vec = embed(text)
        ranked = sorted(self.records, key=lambda r: (-cosine(query_vec, r.embedding), r.id))
        return ranked[:k]

    def digest(self) -> str:
        h = hashlib.sha256()
        for r in self.records:
            h.update(canonical_json({"id": r.id, "text": r.text, "at": r.created_at.tick}).encode())
        return h.hexdigest()


class BaselineJournalAdapter:
    """Drives a BaselineStore from engine events while emitting an auditable
    journal.  Each stored record is mirrored as a single-field topic named
    rec-<id>; eviction removes the topic outright, which is exactly the
    unrecoverable deletion the auditor is meant to flag."""

    def __init__(self, config: EngineConfig, capacity: int = 5):
        self.config = config
        self.store = BaselineStore(capacity=capacity)
        self.state = MemoryState(policies=[])
        self.journal = Journal(
            config=config,
            genesis=state_to_dict(self.state),
            genesis_digest=state_digest(self.state),
        )

    def _commit(self, operator: str, event: EngineEvent, txn: Txn) -> TransitionRecord:
        next_tick = self.state.clock.tick + 1
        txn.state.clock = Timestamp(next_tick)
        record = TransitionRecord(
            tick=next_tick,
            operator=operator,
            input=event.to_dict(),
            deltas=txn.deltas,
            policy_log=[],
            outcome="committed",
            digest_after=state_digest(txn.state),
        )
        self.state = txn.state
        self.journal.records.append(record)
        return record

    def ingest(self, bundle: FactBundle) -> list[int]:
        """One baseline record per fact; duplicates are stored again."""
        ids = []
        txn = Txn(self.state)
        next_tick = self.state.clock.tick + 1
        for fact in bundle.facts:
            text = f"{fact.field}: {fact.value}"
            rec_id, evicted = self.store.put(
                text, next_tick, concept=bundle.topic_hint, field=fact.field, value=fact.value
            )
            ids.append(rec_id)
            topic_id = f"rec-{rec_id:04d}"
            txn.create_topic(topic_id, title=text, summary=bundle.text)
            txn.create_field(topic_id, fact.field, None, self.config.salience.s0, last_access=next_tick)
            prov = Provenance(bundle.source_id, next_tick, fact.excerpt or bundle.text)
            txn.append_entry(topic_id, fact.field, ValueEntry(fact.value, Timestamp(next_tick), (prov,)))
            for old in evicted:
                txn.remove_topic(f"rec-{old.id:04d}")
        self._commit("ingest", EngineEvent.ingest(bundle), txn)
        return ids

    def query(self, q: Query) -> list[Record]:
        results = self.store.query(q.text, self.config.k_topics)
        txn = Txn(self.state)  # read-only retrieval: no deltas, by design
        self._commit("retrieve", EngineEvent.retrieve(q), txn)
        return results

    def tick(self) -> None:
        txn = Txn(self.state)  # the baseline has no decay; tick is a no-op
        self._commit("tick", EngineEvent.tick(), txn)
