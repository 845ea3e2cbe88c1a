"""The four state-level operator branches: ingestion, revision, forgetting,
and retrieval, plus the deterministic evidence scan that feeds revision.

Operators are pure in the sense that they only touch the transaction's
working copy; sequencing, policy evaluation and commit belong to the engine.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field as dc_field
from typing import Optional

from .config import EngineConfig
from .embedding import cosine, embed, select_host, tokenize
from .model import (
    EdgeKind,
    MemoryState,
    Provenance,
    Tier,
    Timestamp,
    ValueEntry,
    active_footprint,
)
from .salience import Eligibility, bump, tier_of
from .transaction import Txn


class OperatorError(ValueError):
    """Operator-level failure; the engine turns these into aborted records."""


# ---------------------------------------------------------------------------
# Inputs and outputs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Fact:
    field: str
    value: str
    entity_tag: Optional[str] = None
    excerpt: str = ""

    def to_dict(self) -> dict:
        return {"field": self.field, "value": self.value, "entity_tag": self.entity_tag, "excerpt": self.excerpt}

    @staticmethod
    def from_dict(d: dict) -> "Fact":
        return Fact(d["field"], d["value"], d.get("entity_tag"), d.get("excerpt", ""))


@dataclass(frozen=True)
class FactBundle:
    facts: tuple[Fact, ...]
    text: str
    source_id: str = "session"
    topic_hint: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "facts": [f.to_dict() for f in self.facts],
            "text": self.text,
            "source_id": self.source_id,
            "topic_hint": self.topic_hint,
        }

    @staticmethod
    def from_dict(d: dict) -> "FactBundle":
        return FactBundle(
            facts=tuple(Fact.from_dict(f) for f in d["facts"]),
            text=d["text"],
            source_id=d.get("source_id", "session"),
            topic_hint=d.get("topic_hint"),
        )


@dataclass(frozen=True)
class Query:
    text: str = ""
    mode: str = "default"  # default | historical | structural | explicit
    as_of: Optional[int] = None
    root: Optional[str] = None
    depth: int = 1
    explicit: Optional[tuple[str, str]] = None  # (topic id, field name)

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "mode": self.mode,
            "as_of": self.as_of,
            "root": self.root,
            "depth": self.depth,
            "explicit": list(self.explicit) if self.explicit else None,
        }

    @staticmethod
    def from_dict(d: dict) -> "Query":
        explicit = d.get("explicit")
        return Query(
            text=d.get("text", ""),
            mode=d.get("mode", "default"),
            as_of=d.get("as_of"),
            root=d.get("root"),
            depth=d.get("depth", 1),
            explicit=tuple(explicit) if explicit else None,
        )


@dataclass(frozen=True)
class Answer:
    topic: str
    field: str
    value: str
    at: Timestamp
    provenance: tuple[Provenance, ...]


@dataclass
class RetrievalOutput:
    answers: list[Answer] = dc_field(default_factory=list)
    accessed_units: list[tuple[str, str]] = dc_field(default_factory=list)
    context: list[tuple[str, str]] = dc_field(default_factory=list)  # (topic id, summary)


@dataclass(frozen=True)
class EvidenceItem:
    kind: str  # duplicate_topics | conflicting_values | schema_drift | dependency_flag | promotion_candidate
    topic: str
    other: Optional[str] = None  # duplicate partner / cause / entity tag
    field: Optional[str] = None
    similarity: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "topic": self.topic,
            "other": self.other,
            "field": self.field,
            "similarity": self.similarity,
        }

    @staticmethod
    def from_dict(d: dict) -> "EvidenceItem":
        return EvidenceItem(d["kind"], d["topic"], d.get("other"), d.get("field"), d.get("similarity"))


# ---------------------------------------------------------------------------
# Dependency rules
# ---------------------------------------------------------------------------


_RULE_RE = re.compile(
    r"^\s*([^\s.]+)\.([^\s.]+)\s*->\s*([^\s.]+)\.([^\s.]+)\s*:\s*([A-Za-z0-9_-]+)\s*$"
)


@dataclass(frozen=True)
class DependencyRule:
    cause_topic: str
    cause_field: str
    dependent_topic: str
    dependent_field: str
    transform: str


def _shift_annotation(current: str, cause: str, cause_value: str) -> str:
    note = f"(needs review: {cause} changed to {cause_value})"
    if current.endswith(note):
        return current  # idempotent so cyclic extension chains terminate
    return f"{current} {note}"


TRANSFORMS = {"shift-annotation": _shift_annotation}


class RuleTable:
    def __init__(self, rules: list[DependencyRule]):
        self.rules = rules

    @staticmethod
    def parse(text: str) -> "RuleTable":
        rules = []
        for lineno, line in enumerate(text.splitlines(), 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            m = _RULE_RE.match(stripped)
            if m is None:
                raise ValueError(f"bad dependency rule on line {lineno}: {stripped!r}")
            rule = DependencyRule(*m.groups())
            if rule.transform not in TRANSFORMS:
                raise ValueError(f"unknown transform on line {lineno}: {rule.transform!r}")
            rules.append(rule)
        return RuleTable(rules)

    @staticmethod
    def empty() -> "RuleTable":
        return RuleTable([])

    def for_dependency(self, cause_topic: str, cause_field: str, dependent_topic: str) -> list[DependencyRule]:
        return [
            r
            for r in self.rules
            if r.cause_topic == cause_topic
            and r.cause_field == cause_field
            and r.dependent_topic == dependent_topic
        ]


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------

_SLUG_RE = re.compile(r"[^a-z0-9]+")


def slugify(text: str, max_tokens: int = 6) -> str:
    tokens = [t for t in _SLUG_RE.split(text.lower()) if t][:max_tokens]
    return "-".join(tokens) or "topic"


def ingest(txn: Txn, bundle: FactBundle, cfg: EngineConfig, next_tick: int) -> list[tuple[str, dict]]:
    """Integrate a fact bundle; returns the sub-events for policy evaluation."""
    if not bundle.facts:
        raise OperatorError("empty-bundle")
    for fact in bundle.facts:
        if not fact.field:
            raise OperatorError("empty-field-name")

    events: list[tuple[str, dict]] = []
    choice = select_host(txn.state, bundle.text, bundle.topic_hint, cfg.tau_topic)
    if choice.topic_id is None:
        topic_id = bundle.topic_hint or slugify(bundle.text)
        if topic_id in txn.state.topics:
            topic_id = f"{topic_id}-{next_tick}"
        title = bundle.text.strip()[:60] or topic_id
        txn.create_topic(topic_id, title=title, summary=bundle.text.strip())
        events.append(("topic_created", {"updated_topic": topic_id}))
    else:
        topic_id = choice.topic_id

    for fact in bundle.facts:
        prov = Provenance(bundle.source_id, next_tick, fact.excerpt or bundle.text.strip())
        topic = txn.state.topics[topic_id]
        existing = topic.fields.get(fact.field)
        if existing is None:
            txn.create_field(topic_id, fact.field, fact.entity_tag, cfg.salience.s0, last_access=next_tick)
            txn.append_entry(topic_id, fact.field, ValueEntry(fact.value, Timestamp(next_tick), (prov,)))
            events.append(("field_updated", {"updated_topic": topic_id, "updated_field": fact.field}))
            continue
        current = existing.current_entry()
        if current is not None and current.value == fact.value:
            # exact duplicate of the stored current value: no new entry, just reinforce
            txn.set_salience(topic_id, fact.field, bump(existing.salience, cfg.salience.delta_access))
            continue
        if current is not None:
            idx = existing.history.index(current)
            txn.set_entry_flags(topic_id, fact.field, idx, superseded=True, compressed=False)
        txn.append_entry(topic_id, fact.field, ValueEntry(fact.value, Timestamp(next_tick), (prov,)))
        events.append(("field_updated", {"updated_topic": topic_id, "updated_field": fact.field}))

    txn.refresh_embedding(topic_id)
    return events


# ---------------------------------------------------------------------------
# Retrieval
# ---------------------------------------------------------------------------


def retrieve_read(state: MemoryState, q: Query, cfg: EngineConfig) -> RetrievalOutput:
    """Pure read half of retrieval; shared with the auditor."""
    out = RetrievalOutput()
    if q.mode == "explicit":
        if q.explicit is None:
            raise OperatorError("explicit lookup requires (topic, field)")
        topic_id, field_name = q.explicit
        topic = state.topics.get(topic_id)
        f = topic.fields.get(field_name) if topic else None
        if f is None:
            raise OperatorError("unknown-unit")
        for entry in f.history:
            out.answers.append(Answer(topic_id, field_name, entry.value, entry.at, entry.provenance))
        out.accessed_units.append((topic_id, field_name))
        return out

    if q.mode == "structural":
        if q.root is None or q.root not in state.topics:
            raise OperatorError("unknown-unit")
        if q.depth < 1:
            raise OperatorError("structural depth must be at least 1")
        seen = {q.root}
        frontier = [q.root]
        out.context.append((q.root, state.topics[q.root].summary))
        for _ in range(q.depth):
            nxt = []
            for tid in frontier:
                neighbors = set(state.association_neighbors(tid)) | set(state.extension_successors(tid))
                for n in sorted(neighbors):
                    if n not in seen:
                        seen.add(n)
                        nxt.append(n)
                        out.context.append((n, state.topics[n].summary))
            frontier = nxt
        return out

    if q.mode not in ("default", "historical"):
        raise OperatorError(f"unknown query mode: {q.mode}")
    if q.mode == "historical" and q.as_of is not None and q.as_of > state.clock.tick:
        raise OperatorError("historical as_of is in the future")

    query_vec = embed(q.text)
    ranked = sorted(
        (t for t in state.topics.values() if not t.archived),
        key=lambda t: (-cosine(query_vec, t.embedding), t.id),
    )[: cfg.k_topics]
    q_tokens = set(tokenize(q.text))

    answered_topics = []
    for topic in ranked:
        topic_answered = False
        for name in sorted(topic.fields):
            f = topic.fields[name]
            if not q_tokens & set(tokenize(name)):
                continue
            if q.mode == "default":
                if f.tier is Tier.HIDDEN:
                    continue
                entry = f.current_entry()
                if entry is None:
                    continue
                out.answers.append(Answer(topic.id, name, entry.value, entry.at, entry.provenance))
                out.accessed_units.append((topic.id, name))
                topic_answered = True
            else:  # historical: all entries up to as_of, superseded included
                hit = False
                for entry in f.history:
                    if q.as_of is None or entry.at.tick <= q.as_of:
                        out.answers.append(Answer(topic.id, name, entry.value, entry.at, entry.provenance))
                        hit = True
                if hit:
                    out.accessed_units.append((topic.id, name))
                    topic_answered = True
        if topic_answered:
            answered_topics.append(topic.id)

    # association-linked context; context-only topics get no salience bump
    for tid in answered_topics:
        for neighbor in state.association_neighbors(tid):
            topic = state.topics[neighbor]
            if not topic.archived and all(c[0] != neighbor for c in out.context):
                out.context.append((neighbor, topic.summary))
    return out


def retrieve(txn: Txn, q: Query, cfg: EngineConfig, next_tick: int) -> tuple[RetrievalOutput, list[tuple[str, dict]]]:
    out = retrieve_read(txn.state, q, cfg)
    events: list[tuple[str, dict]] = []
    seen_topics = set()
    for topic_id, field_name in out.accessed_units:
        f = txn.state.topics[topic_id].fields[field_name]
        txn.set_salience(topic_id, field_name, bump(f.salience, cfg.salience.delta_access))
        txn.set_last_access(topic_id, field_name, next_tick)
        if topic_id not in seen_topics:
            seen_topics.add(topic_id)
            events.append(("retrieval_performed", {"accessed_topic": topic_id}))
    return out, events


# ---------------------------------------------------------------------------
# Revision
# ---------------------------------------------------------------------------


def detect_evidence(state: MemoryState, cfg: EngineConfig) -> list[EvidenceItem]:
    items: list[EvidenceItem] = []

    for topic_id, cause in sorted(state.revision_queue):
        items.append(EvidenceItem("dependency_flag", topic_id, other=cause))

    live = [state.topics[tid] for tid in sorted(state.topics) if not state.topics[tid].archived]
    for i, a in enumerate(live):
        for b in live[i + 1 :]:
            sim = cosine(a.embedding, b.embedding)
            if sim < cfg.tau_dup:
                continue
            ta, tb = set(tokenize(a.title)), set(tokenize(b.title))
            if not ta or not tb:
                continue
            overlap = len(ta & tb) / min(len(ta), len(tb))
            if overlap >= 0.5:
                items.append(EvidenceItem("duplicate_topics", a.id, other=b.id, similarity=sim))

    for topic in live:
        for name in sorted(topic.fields):
            f = topic.fields[name]
            currents = [e for e in f.history if not e.superseded and not e.compressed]
            if len(currents) > 1:
                items.append(EvidenceItem("conflicting_values", topic.id, field=name))

    for topic in live:
        total_entries = sum(len(f.history) for f in topic.fields.values())
        if total_entries < cfg.m_promote:
            continue
        tags: dict[str, int] = {}
        for f in topic.fields.values():
            if f.entity_tag:
                tags[f.entity_tag] = tags.get(f.entity_tag, 0) + 1
        for tag in sorted(tags):
            if tags[tag] >= cfg.n_promote and slugify(tag) not in state.topics:
                items.append(EvidenceItem("promotion_candidate", topic.id, other=tag))
    return items


def _merge_histories(a: list[ValueEntry], b: list[ValueEntry]) -> list[ValueEntry]:
    merged = sorted(a + b, key=lambda e: e.at.tick)
    candidates = [e for e in merged if not e.compressed]
    current = candidates[-1] if candidates else None
    out = []
    for e in merged:
        superseded = e is not current
        out.append(ValueEntry(e.value, e.at, e.provenance, superseded=superseded if not e.compressed else True,
                              compressed=e.compressed))
    return out


def revise(
    txn: Txn,
    evidence: list[EvidenceItem],
    cfg: EngineConfig,
    rules: RuleTable,
    next_tick: int,
) -> list[tuple[str, dict]]:
    events: list[tuple[str, dict]] = []
    for item in evidence:
        if item.kind == "dependency_flag":
            events.extend(_repair_dependency(txn, item, rules, next_tick))
        elif item.kind == "duplicate_topics":
            events.extend(_merge_topics(txn, item.topic, item.other, cfg, next_tick))
        elif item.kind == "conflicting_values":
            _resolve_conflict(txn, item.topic, item.field)
        elif item.kind == "promotion_candidate":
            events.extend(_promote(txn, item.topic, item.other, next_tick))
        elif item.kind == "schema_drift":
            pass  # detected for reporting; no automatic repair
        else:
            raise OperatorError(f"unknown evidence kind: {item.kind}")
    return events


def _repair_dependency(txn: Txn, item: EvidenceItem, rules: RuleTable, next_tick: int) -> list[tuple[str, dict]]:
    topic_id = item.topic
    if topic_id not in txn.state.topics:
        raise OperatorError(f"revision target missing: {topic_id}")
    txn.remove_flag(topic_id)
    cause = item.other or ""
    if "." not in cause:
        return []
    cause_topic, cause_field = cause.split(".", 1)
    cause_entry = None
    src = txn.state.topics.get(cause_topic)
    if src is not None:
        f = src.fields.get(cause_field)
        if f is not None:
            cause_entry = f.current_entry()
    if cause_entry is None:
        return []

    events = []
    topic = txn.state.topics[topic_id]
    changed = False
    for rule in rules.for_dependency(cause_topic, cause_field, topic_id):
        dep = topic.fields.get(rule.dependent_field)
        if dep is None:
            continue
        current = dep.current_entry()
        if current is None:
            continue
        new_value = TRANSFORMS[rule.transform](current.value, cause, cause_entry.value)
        if new_value == current.value:
            continue
        prov = Provenance("revision", cause_entry.at.tick, f"{cause} -> {cause_entry.value}")
        idx = dep.history.index(current)
        txn.set_entry_flags(topic_id, rule.dependent_field, idx, superseded=True, compressed=False)
        txn.append_entry(topic_id, rule.dependent_field, ValueEntry(new_value, Timestamp(next_tick), (prov,)))
        events.append(("field_updated", {"updated_topic": topic_id, "updated_field": rule.dependent_field}))
        changed = True
    if changed:
        txn.refresh_embedding(topic_id)
    return events


def _merge_topics(txn: Txn, a_id: str, b_id: str, cfg: EngineConfig, next_tick: int) -> list[tuple[str, dict]]:
    for tid in (a_id, b_id):
        topic = txn.state.topics.get(tid)
        if topic is None:
            raise OperatorError(f"merge target missing: {tid}")
        if topic.archived:
            raise OperatorError(f"merge-archived:{tid}")
    winner_id, loser_id = sorted((a_id, b_id))
    winner = txn.state.topics[winner_id]
    loser = txn.state.topics[loser_id]

    for name in sorted(loser.fields):
        lf = loser.fields[name]
        wf = winner.fields.get(name)
        if wf is None:
            merged = lf.clone()
        else:
            merged = wf.clone()
            merged.history = _merge_histories(wf.history, lf.history)
            merged.salience = max(wf.salience, lf.salience)
            merged.last_access = max(wf.last_access, lf.last_access)
            merged.tier = _tier_for(merged.salience, cfg)
        txn.install_field(winner_id, merged)

    # re-point the loser's edges at the winner; the loser keeps its own
    # history so archived content stays recoverable
    for key, edge in sorted(txn.state.edges.items()):
        if loser_id not in (edge.src, edge.dst):
            continue
        txn.remove_edge(edge.src, edge.dst, edge.kind)
        src = winner_id if edge.src == loser_id else edge.src
        dst = winner_id if edge.dst == loser_id else edge.dst
        if src != dst and (src, dst, edge.kind.value) not in txn.state.edges:
            txn.add_edge(src, dst, edge.kind, edge.created_at.tick)
    txn.archive_topic(loser_id, merged_into=winner_id)
    txn.refresh_embedding(winner_id)
    return [("topic_merged", {"updated_topic": winner_id})]


def _tier_for(salience: float, cfg: EngineConfig) -> Tier:
    elig = tier_of(salience, cfg.salience)
    if elig in (Eligibility.HIDE, Eligibility.ARCHIVE):
        return Tier.HIDDEN
    if elig is Eligibility.COMPRESS:
        return Tier.COMPRESSED
    return Tier.ACTIVE


def _resolve_conflict(txn: Txn, topic_id: str, field_name: str) -> None:
    topic = txn.state.topics.get(topic_id)
    f = topic.fields.get(field_name) if topic else None
    if f is None:
        raise OperatorError(f"conflict target missing: {topic_id}.{field_name}")
    currents = [(i, e) for i, e in enumerate(f.history) if not e.superseded and not e.compressed]
    if len(currents) <= 1:
        return
    keep = max(currents, key=lambda pair: (pair[1].at.tick, pair[0]))
    for i, _ in currents:
        if i != keep[0]:
            txn.set_entry_flags(topic_id, field_name, i, superseded=True, compressed=False)


def _promote(txn: Txn, src_id: str, tag: str, next_tick: int) -> list[tuple[str, dict]]:
    src = txn.state.topics.get(src_id)
    if src is None:
        raise OperatorError(f"promotion source missing: {src_id}")
    new_id = slugify(tag)
    if new_id in txn.state.topics:
        return []
    tagged = [name for name in sorted(src.fields) if src.fields[name].entity_tag == tag]
    if not tagged:
        return []
    txn.create_topic(new_id, title=tag.replace("-", " ").title(), summary=f"Split from {src.title}")
    for name in tagged:
        payload = src.fields[name].clone()
        txn.install_field(new_id, payload)
        txn.remove_field(src_id, name)
    txn.add_edge(src_id, new_id, EdgeKind.EXTENSION, next_tick)
    txn.refresh_embedding(src_id)
    txn.refresh_embedding(new_id)
    return [("topic_created", {"updated_topic": new_id})]


# ---------------------------------------------------------------------------
# Forgetting
# ---------------------------------------------------------------------------


def forget(txn: Txn, cfg: EngineConfig, next_tick: int, targets: Optional[list[str]] = None) -> None:
    """Apply the graded attenuation ladder, then enforce the footprint bound."""
    p = cfg.salience
    topic_ids = targets if targets is not None else sorted(txn.state.topics)
    for tid in topic_ids:
        topic = txn.state.topics.get(tid)
        if topic is None or topic.archived:
            continue
        for name in sorted(topic.fields):
            f = topic.fields[name]
            elig = tier_of(f.salience, p)
            if elig is Eligibility.CURRENT:
                if f.tier is not Tier.ACTIVE:
                    txn.set_tier(tid, name, Tier.ACTIVE)
                continue
            _compress_field(txn, tid, name, p.k_recent)
            if elig is Eligibility.COMPRESS:
                if f.tier is not Tier.COMPRESSED:
                    txn.set_tier(tid, name, Tier.COMPRESSED)
            else:  # HIDE or ARCHIVE eligibility hides the field
                if f.tier is not Tier.HIDDEN:
                    txn.set_tier(tid, name, Tier.HIDDEN)
        topic = txn.state.topics[tid]
        if topic.fields and all(f.salience < p.theta_archive for f in topic.fields.values()):
            txn.archive_topic(tid)

    _enforce_footprint(txn, cfg, next_tick)


def _compress_field(txn: Txn, topic_id: str, name: str, k_recent: int) -> None:
    f = txn.state.topics[topic_id].fields[name]
    cut = len(f.history) - k_recent
    current = f.current_entry()
    if current is not None:
        cut = min(cut, f.history.index(current))
    if cut < 2:
        return  # nothing worth replacing with a summary
    run = f.history[:cut]
    provs: list = []
    seen = set()
    for entry in run:
        for prov in entry.provenance:
            key = (prov.source_id, prov.event_id, prov.excerpt)
            if key not in seen:
                seen.add(key)
                provs.append(prov)
    summary = ValueEntry(
        value=f"{len(run)} earlier values ({run[0].value} ... {run[-1].value})",
        at=run[-1].at,
        provenance=tuple(provs),
        superseded=True,
        compressed=True,
    )
    txn.compress_history(topic_id, name, cut, summary)


def _enforce_footprint(txn: Txn, cfg: EngineConfig, next_tick: int) -> None:
    bound = cfg.beta.bound(next_tick)
    excess = active_footprint(txn.state) - bound
    if excess <= 0:
        return
    candidates = []
    for tid in sorted(txn.state.topics):
        topic = txn.state.topics[tid]
        if topic.archived:
            continue
        for name in sorted(topic.fields):
            f = topic.fields[name]
            if f.tier is Tier.ACTIVE:
                candidates.append((f.salience, f.last_access, name, tid))
    # relevance-ordered, never age-ordered: lowest salience goes first
    candidates.sort()
    for _, _, name, tid in candidates[:excess]:
        txn.set_tier(tid, name, Tier.HIDDEN)


def hide_order(state: MemoryState) -> list[tuple[str, str]]:
    """The order fields would be hidden in under footprint pressure."""
    keyed = []
    for tid in sorted(state.topics):
        topic = state.topics[tid]
        if topic.archived:
            continue
        for name in sorted(topic.fields):
            f = topic.fields[name]
            keyed.append((f.salience, f.last_access, name, tid))
    keyed.sort()
    return [(tid, name) for _, _, name, tid in keyed]
