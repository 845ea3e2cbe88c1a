"""Trajectory auditor: replays a journal snapshot by snapshot and checks the
six correctness conditions, producing a deterministic violation report.

The query-soundness check (C1) compares probe answers against a shadow
ledger built purely from the ingestion inputs recorded in the journal --
a deliberate second implementation of "what should be current", never read
from engine state.  Units whose current value was produced by a committed
revision are exempt from the shadow comparison (their values are derived,
not ingested); they are still covered by C2 and C4.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Optional

from .engine import CorruptJournalError, Journal, TransitionRecord
from .model import (
    MemoryState,
    Timestamp,
    active_footprint,
    canonical_json,
    state_digest,
    stale_current_exists,
)
from .operators import OperatorError, Query, hide_order, retrieve_read
from .policy import EventKind, evaluate_condition
from .transaction import apply_delta

CONDITIONS = ("c1", "c2", "c3", "c4", "c5", "c6")

# delta kinds that can remove or rewrite history entries; anything else
# cannot lose provenance, so the before/after scan is skipped
_PROVENANCE_RISK_DELTAS = frozenset(
    ("history_compressed", "field_removed", "field_installed", "topic_removed", "entry_flags")
)


@dataclass(frozen=True)
class Violation:
    tick: int
    subject: str
    detail: str


@dataclass
class ViolationReport:
    c1: list[Violation] = dc_field(default_factory=list)
    c2: list[Violation] = dc_field(default_factory=list)
    c3: list[Violation] = dc_field(default_factory=list)
    c4: list[Violation] = dc_field(default_factory=list)
    c5: list[Violation] = dc_field(default_factory=list)
    c6: list[Violation] = dc_field(default_factory=list)

    def totals(self) -> dict[str, int]:
        return {name: len(getattr(self, name)) for name in CONDITIONS}

    @property
    def passed(self) -> bool:
        return all(count == 0 for count in self.totals().values())

    def add(self, condition: str, tick: int, subject: str, detail: str) -> None:
        getattr(self, condition).append(Violation(tick, subject, detail))


class ShadowLedger:
    """Last-writer-wins view of ingestion inputs, keyed by concept + field.

    The concept key is the bundle's topic_hint; an unhinted bundle joins the
    unique concept already owning the fact's field name, else starts an
    anonymous concept.
    """

    def __init__(self):
        self.concepts: dict[str, dict[str, list[tuple[int, str]]]] = {}

    def ingest(self, bundle_dict: dict, tick: int) -> None:
        hint = bundle_dict.get("topic_hint")
        for fact in bundle_dict["facts"]:
            name = fact["field"]
            concept = hint
            if concept is None:
                owners = [c for c, fields in self.concepts.items() if name in fields]
                concept = owners[0] if len(owners) == 1 else f"anon-{tick}"
            self.concepts.setdefault(concept, {}).setdefault(name, []).append((tick, fact["value"]))


def _owners(ledger: ShadowLedger, field_name: str) -> list[str]:
    return [c for c, fields in ledger.concepts.items() if field_name in fields]


def shadow_expected(ledger: ShadowLedger, topic_id: str, field_name: str) -> Optional[str]:
    if topic_id in ledger.concepts:
        writes = ledger.concepts[topic_id].get(field_name)
        return writes[-1][1] if writes else None
    owners = _owners(ledger, field_name)
    if len(owners) == 1:
        writes = ledger.concepts[owners[0]][field_name]
        return writes[-1][1]
    return None  # unknown or ambiguous: no opinion


def audit(journal: Journal, probes: list[Query]) -> ViolationReport:
    report = ViolationReport()
    cfg = journal.config
    state = journal.genesis_state()
    if state_digest(state) != journal.genesis_digest:
        raise CorruptJournalError("genesis digest mismatch")

    ledger = ShadowLedger()
    revision_touched: set[tuple[str, str]] = set()
    pending_revision: set[str] = set()
    ever_units: set[tuple[str, str]] = set()
    for topic in state.topics.values():
        for name in topic.fields:
            ever_units.add((topic.id, name))

    for record in journal.records:
        if not record.committed:
            continue
        pre_state = state
        tick = record.tick

        # C3 / C6 need the read set of this retrieve as seen before commit
        touched_topics: set[str] = set()
        accessed_units: list[tuple[str, str]] = []
        if record.operator == "retrieve":
            query = Query.from_dict(record.input["query"])
            try:
                out = retrieve_read(pre_state, query, cfg)
                accessed_units = out.accessed_units
                touched_topics = {t for t, _ in accessed_units}
            except OperatorError:
                pass
        pre_saliences = {
            (t, f): pre_state.topics[t].fields[f].salience
            for t, f in accessed_units
            if t in pre_state.topics and f in pre_state.topics[t].fields
        }
        pre_order = hide_order(pre_state) if accessed_units else []
        pre_prov = None
        if record.operator in ("revise", "forget", "tick") and any(
            d["kind"] in _PROVENANCE_RISK_DELTAS for d in record.deltas
        ):
            pre_prov = _reachable_provenance(pre_state)

        state = _advance(state, record)

        # --- bookkeeping from deltas -----------------------------------
        changed_topics = set()
        installed_fields = set()
        for delta in record.deltas:
            kind = delta["kind"]
            if kind == "entry_appended":
                changed_topics.add(delta["topic"])
                ever_units.add((delta["topic"], delta["field"]))
                if record.operator == "revise":
                    revision_touched.add((delta["topic"], delta["field"]))
            elif kind == "field_created":
                ever_units.add((delta["topic"], delta["field"]))
            elif kind == "field_installed":
                ever_units.add((delta["topic"], delta["payload"]["name"]))
                installed_fields.add(delta["payload"]["name"])
                if record.operator == "revise":
                    revision_touched.add((delta["topic"], delta["payload"]["name"]))
        for delta in record.deltas:
            if delta["kind"] == "field_removed" and delta["field"] in installed_fields:
                ever_units.discard((delta["topic"], delta["field"]))  # a move, not a loss

        if record.operator == "ingest" and record.input.get("bundle"):
            ledger.ingest(record.input["bundle"], tick)

        # --- C3: dependency consistency --------------------------------
        if record.operator == "retrieve":
            for topic_id in sorted(touched_topics & pending_revision):
                report.add("c3", tick, topic_id, "retrieve touched a topic with pending revision")
        if record.operator == "revise":
            target = record.input.get("target")
            if target:
                pending_revision.discard(target)
            evidence = record.input.get("evidence") or []
            for item in evidence:
                if item.get("kind") == "dependency_flag":
                    pending_revision.discard(item["topic"])
        for topic_id in sorted(changed_topics):
            if record.operator in ("ingest", "revise"):
                for successor in state.extension_successors(topic_id):
                    pending_revision.add(successor)

        # --- C2: transition soundness -----------------------------------
        ctx = {"beta": cfg.beta.bound(tick)}
        for policy in state.policies:
            if policy.on_event is not EventKind.PRE_COMMIT:
                continue
            if evaluate_condition(policy.condition, state, ctx):
                report.add("c2", tick, policy.name, "post-commit state violates a pre_commit policy")
        if stale_current_exists(state):
            report.add("c2", tick, "state", "a superseded value would be returned as current")

        # --- C4: provenance preservation --------------------------------
        if pre_prov is not None:
            post_prov = _reachable_provenance(state)
            missing = pre_prov - post_prov
            for item in sorted(missing):
                report.add("c4", tick, item[0], f"provenance record lost: {item}")

        # --- C5: bounded active state ------------------------------------
        footprint = active_footprint(state)
        bound = cfg.beta.bound(tick)
        if footprint > bound:
            report.add("c5", tick, "footprint", f"active footprint {footprint} exceeds bound {bound}")

        # --- C6: retrieval-induced adaptation ----------------------------
        if record.operator == "retrieve" and accessed_units:
            post_order = hide_order(state)
            accessed_set = set(accessed_units)
            unbumped = []
            worsened = []
            for unit in accessed_units:
                t, f = unit
                post_topic = state.topics.get(t)
                post_field = post_topic.fields.get(f) if post_topic else None
                pre_s = pre_saliences.get(unit)
                if post_field is None or pre_s is None or not post_field.salience > pre_s:
                    unbumped.append(f"{t}.{f}")
                    continue
                if unit in pre_order and unit in post_order:
                    # rank among unaccessed units only; accessed units may
                    # legitimately swap among themselves
                    pre_rank = _rank_vs_unaccessed(pre_order, unit, accessed_set)
                    post_rank = _rank_vs_unaccessed(post_order, unit, accessed_set)
                    if post_rank < pre_rank:
                        worsened.append(f"{t}.{f}")
            # one violation per retrieve, however many units it touched
            if unbumped:
                report.add("c6", tick, "retrieve", "no strict salience increase for " + ", ".join(unbumped))
            elif worsened:
                report.add("c6", tick, "retrieve", "hide-ordering rank worsened for " + ", ".join(worsened))

        # --- C1: query soundness -----------------------------------------
        for probe in probes:
            try:
                out = retrieve_read(state, probe, cfg)
            except OperatorError:
                continue
            for answer in out.answers:
                unit = (answer.topic, answer.field)
                if unit in revision_touched:
                    continue
                expected = shadow_expected(ledger, answer.topic, answer.field)
                if expected is not None and expected != answer.value:
                    report.add(
                        "c1",
                        tick,
                        f"{answer.topic}.{answer.field}",
                        f"probe returned {answer.value!r}, last ingested value is {expected!r}",
                    )

    # --- C5 recoverability: everything ever stored stays reachable -------
    for topic_id, field_name in sorted(ever_units):
        topic = state.topics.get(topic_id)
        f = topic.fields.get(field_name) if topic else None
        if f is None or not f.history:
            report.add("c5", state.clock.tick, f"{topic_id}.{field_name}", "unit no longer answers explicit lookup")

    return report


def _rank_vs_unaccessed(order: list[tuple[str, str]], unit: tuple[str, str], accessed: set) -> int:
    """Number of unaccessed units that would be hidden before `unit`."""
    rank = 0
    for other in order:
        if other == unit:
            break
        if other not in accessed:
            rank += 1
    return rank


def _advance(state: MemoryState, record: TransitionRecord) -> MemoryState:
    for delta in record.deltas:
        apply_delta(state, delta)
    state.clock = Timestamp(record.tick)
    if state_digest(state) != record.digest_after:
        raise CorruptJournalError(f"digest mismatch at tick {record.tick}")
    return state


def _reachable_provenance(state: MemoryState) -> set[tuple[str, int, str]]:
    out = set()
    for topic in state.topics.values():
        for f in topic.fields.values():
            for entry in f.history:
                for prov in entry.provenance:
                    out.add((prov.source_id, prov.event_id, prov.excerpt))
    return out


# ---------------------------------------------------------------------------
# Report rendering
# ---------------------------------------------------------------------------


def report_to_dict(report: ViolationReport) -> dict:
    return {
        name: [
            {"tick": v.tick, "subject": v.subject, "detail": v.detail}
            for v in sorted(getattr(report, name), key=lambda v: (v.tick, v.subject))
        ]
        for name in CONDITIONS
    }


def render_report(report: ViolationReport) -> str:
    totals = report.totals()
    lines = []
    if report.passed:
        lines.append("PASS C1-C6: 0 violations")
    else:
        total = sum(totals.values())
        lines.append(f"FAIL C1-C6: {total} violations")
    for name in CONDITIONS:
        lines.append(f"{name.upper()}: {totals[name]}")
        for v in sorted(getattr(report, name), key=lambda v: (v.tick, v.subject)):
            lines.append(f"  tick {v.tick} {v.subject}: {v.detail}")
    lines.append(canonical_json(report_to_dict(report)))
    return "\n".join(lines) + "\n"
