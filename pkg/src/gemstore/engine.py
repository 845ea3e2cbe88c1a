"""Transition engine: dispatch one event to an operator branch, evaluate the
policy set against the proposed state, and atomically commit or abort.

Every committed transition consumes one logical tick and appends a replayable
record to the journal; aborted events are journaled without consuming a tick
so auditors can distinguish "rejected" from "never attempted".
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Optional

from .config import EngineConfig
from .embedding import RoutingError
from .model import (
    MemoryState,
    Timestamp,
    state_digest,
    state_from_dict,
    state_to_dict,
)
from .operators import (
    EvidenceItem,
    FactBundle,
    OperatorError,
    Query,
    RetrievalOutput,
    RuleTable,
    detect_evidence,
    forget,
    ingest,
    retrieve,
    revise,
)
from .policy import ActionSpec, EvaluationError, EventKind, Policy, evaluate_condition
from .salience import decay
from .transaction import Txn, apply_delta


class CorruptJournalError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Events
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EngineEvent:
    kind: str  # ingest | retrieve | revise | forget | tick
    bundle: Optional[FactBundle] = None
    query: Optional[Query] = None
    evidence: Optional[tuple[EvidenceItem, ...]] = None  # None means auto-detect
    target: Optional[str] = None  # revise: drain target topic

    @staticmethod
    def ingest(bundle: FactBundle) -> "EngineEvent":
        return EngineEvent("ingest", bundle=bundle)

    @staticmethod
    def retrieve(query: Query) -> "EngineEvent":
        return EngineEvent("retrieve", query=query)

    @staticmethod
    def revise(evidence: Optional[list[EvidenceItem]] = None, target: Optional[str] = None) -> "EngineEvent":
        return EngineEvent("revise", evidence=tuple(evidence) if evidence is not None else None, target=target)

    @staticmethod
    def forget() -> "EngineEvent":
        return EngineEvent("forget")

    @staticmethod
    def tick() -> "EngineEvent":
        return EngineEvent("tick")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "bundle": self.bundle.to_dict() if self.bundle else None,
            "query": self.query.to_dict() if self.query else None,
            "evidence": [e.to_dict() for e in self.evidence] if self.evidence is not None else None,
            "target": self.target,
        }

    @staticmethod
    def from_dict(d: dict) -> "EngineEvent":
        return EngineEvent(
            kind=d["kind"],
            bundle=FactBundle.from_dict(d["bundle"]) if d.get("bundle") else None,
            query=Query.from_dict(d["query"]) if d.get("query") else None,
            evidence=tuple(EvidenceItem.from_dict(e) for e in d["evidence"]) if d.get("evidence") is not None else None,
            target=d.get("target"),
        )


@dataclass
class TransitionRecord:
    tick: int
    operator: str
    input: dict  # serialized EngineEvent
    deltas: list[dict]
    policy_log: list[dict]  # {policy, fired, action}
    outcome: str  # "committed" | "aborted"
    reason: Optional[str] = None
    digest_after: str = ""

    @property
    def committed(self) -> bool:
        return self.outcome == "committed"

    def to_dict(self) -> dict:
        return {
            "tick": self.tick,
            "operator": self.operator,
            "input": self.input,
            "deltas": self.deltas,
            "policy_log": self.policy_log,
            "outcome": self.outcome,
            "reason": self.reason,
            "digest_after": self.digest_after,
        }

    @staticmethod
    def from_dict(d: dict) -> "TransitionRecord":
        return TransitionRecord(
            tick=d["tick"],
            operator=d["operator"],
            input=d["input"],
            deltas=d["deltas"],
            policy_log=d["policy_log"],
            outcome=d["outcome"],
            reason=d.get("reason"),
            digest_after=d["digest_after"],
        )


@dataclass
class Journal:
    config: EngineConfig
    genesis: dict  # serialized genesis MemoryState
    genesis_digest: str
    records: list[TransitionRecord] = dc_field(default_factory=list)

    def genesis_state(self) -> MemoryState:
        return state_from_dict(self.genesis)


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------


class Engine:
    """Single-writer engine over immutable snapshots.

    Revision flags are drained lazily: before any retrieve, each flagged
    topic gets its own revision transition so reads never observe a flagged
    topic (dependency consistency with the weakest schedule that keeps
    reads sound).
    """

    def __init__(
        self,
        config: Optional[EngineConfig] = None,
        genesis: Optional[MemoryState] = None,
        policies: Optional[list[Policy]] = None,
        rules: Optional[RuleTable] = None,
    ):
        from .policy import default_policy_set

        self.config = config or EngineConfig()
        self.config.validate()
        self.rules = rules or RuleTable.empty()
        if genesis is not None:
            self.state = genesis
        else:
            self.state = MemoryState(policies=policies if policies is not None else default_policy_set())
        genesis_dict = state_to_dict(self.state)
        self.journal = Journal(
            config=self.config,
            genesis=genesis_dict,
            genesis_digest=state_digest(self.state),
        )

    # -- public API -------------------------------------------------------

    def submit(self, event: EngineEvent) -> tuple[Optional[RetrievalOutput], list[TransitionRecord]]:
        records: list[TransitionRecord] = []
        if event.kind == "retrieve":
            records.extend(self._drain_revision_queue())
        output, record = self._apply_once(event)
        records.append(record)
        return output, records

    def digest(self) -> str:
        return state_digest(self.state)

    # -- internals --------------------------------------------------------

    def _drain_revision_queue(self) -> list[TransitionRecord]:
        records: list[TransitionRecord] = []
        visited: set[str] = set()
        while True:
            pending = sorted({t for t, _ in self.state.revision_queue if t not in visited})
            if not pending:
                break
            topic_id = pending[0]
            visited.add(topic_id)
            causes = sorted(c for t, c in self.state.revision_queue if t == topic_id)
            evidence = [EvidenceItem("dependency_flag", topic_id, other=c) for c in causes]
            _, record = self._apply_once(EngineEvent.revise(evidence=evidence, target=topic_id))
            records.append(record)
        # flags re-added on visited topics within this drain wait for the
        # next retrieve; the visited set bounds cyclic extension chains
        return records

    def _apply_once(self, event: EngineEvent) -> tuple[Optional[RetrievalOutput], TransitionRecord]:
        next_tick = self.state.clock.tick + 1
        txn = Txn(self.state)
        policy_log: list[dict] = []
        output: Optional[RetrievalOutput] = None

        try:
            sub_events = self._dispatch(txn, event, next_tick)
            if event.kind == "retrieve":
                output, sub_events = sub_events
            self._run_event_policies(txn, sub_events, policy_log, next_tick)
            reject = self._run_pre_commit_policies(txn, policy_log, next_tick)
        except (OperatorError, EvaluationError, RoutingError) as exc:
            return None, self._abort(event, str(exc), policy_log)

        if reject is not None:
            return None, self._abort(event, reject, policy_log)

        txn.state.clock = Timestamp(next_tick)
        record = TransitionRecord(
            tick=next_tick,
            operator=event.kind,
            input=event.to_dict(),
            deltas=txn.deltas,
            policy_log=policy_log,
            outcome="committed",
            digest_after=state_digest(txn.state),
        )
        self.state = txn.state
        self.journal.records.append(record)
        return output, record

    def _abort(self, event: EngineEvent, reason: str, policy_log: list[dict]) -> TransitionRecord:
        record = TransitionRecord(
            tick=self.state.clock.tick,
            operator=event.kind,
            input=event.to_dict(),
            deltas=[],
            policy_log=policy_log,
            outcome="aborted",
            reason=reason,
            digest_after=state_digest(self.state),
        )
        self.journal.records.append(record)
        return record

    def _dispatch(self, txn: Txn, event: EngineEvent, next_tick: int):
        if event.kind == "ingest":
            return ingest(txn, event.bundle, self.config, next_tick)
        if event.kind == "retrieve":
            return retrieve(txn, event.query, self.config, next_tick)
        if event.kind == "revise":
            evidence = list(event.evidence) if event.evidence is not None else detect_evidence(txn.state, self.config)
            return revise(txn, evidence, self.config, self.rules, next_tick)
        if event.kind == "forget":
            forget(txn, self.config, next_tick)
            return []
        if event.kind == "tick":
            # a tick is decay plus the attenuation ladder, in one transition
            self._decay_all(txn)
            forget(txn, self.config, next_tick)
            return [("tick", {})]
        raise OperatorError(f"unknown event kind: {event.kind}")

    def _decay_all(self, txn: Txn) -> None:
        lam = self.config.salience.decay
        for tid in sorted(txn.state.topics):
            topic = txn.state.topics[tid]
            if topic.archived:
                continue  # archived content is frozen, not decayed further
            for name in sorted(topic.fields):
                f = topic.fields[name]
                txn.set_salience(tid, name, decay(f.salience, 1, lam))

    def _run_event_policies(self, txn: Txn, sub_events, policy_log: list[dict], next_tick: int) -> None:
        for event_name, ctx in sub_events:
            for policy in txn.state.policies:
                if policy.on_event.value != event_name:
                    continue
                fired = evaluate_condition(policy.condition, txn.state, ctx)
                policy_log.append({"policy": policy.name, "fired": fired, "action": policy.action.kind})
                if fired:
                    self._apply_action(txn, policy.action, ctx, next_tick)

    def _run_pre_commit_policies(self, txn: Txn, policy_log: list[dict], next_tick: int) -> Optional[str]:
        ctx = {"beta": self.config.beta.bound(next_tick)}
        for policy in txn.state.policies:
            if policy.on_event is not EventKind.PRE_COMMIT:
                continue
            fired = evaluate_condition(policy.condition, txn.state, ctx)
            policy_log.append({"policy": policy.name, "fired": fired, "action": policy.action.kind})
            if fired:
                if policy.action.kind == "reject_transition":
                    return policy.action.message or policy.name
                self._apply_action(txn, policy.action, ctx, next_tick)
        return None

    def _apply_action(self, txn: Txn, action: ActionSpec, ctx: dict, next_tick: int) -> None:
        if action.kind == "noop":
            return
        if action.kind == "flag_for_revision":
            if action.target == "dependent_topic":
                src = ctx.get("updated_topic")
                if src is None:
                    raise EvaluationError("unbound variable: updated_topic")
                cause = f"{src}.{ctx.get('updated_field', '')}".rstrip(".")
                for dep in txn.state.extension_successors(src):
                    txn.add_flag(dep, cause)
            else:
                target = self._resolve_target(action.target, ctx)
                txn.add_flag(target, ctx.get("updated_topic", "policy"))
            return
        if action.kind == "attenuate":
            if action.target is None:
                forget(txn, self.config, next_tick)
            else:
                forget(txn, self.config, next_tick, targets=[self._resolve_target(action.target, ctx)])
            return
        if action.kind == "archive":
            target = self._resolve_target(action.target, ctx)
            if target in txn.state.topics and not txn.state.topics[target].archived:
                txn.archive_topic(target)
            return
        if action.kind == "reject_transition":
            # only meaningful on pre_commit; elsewhere it is inert by design
            return
        raise OperatorError(f"unknown action kind: {action.kind}")

    def _resolve_target(self, target: Optional[str], ctx: dict) -> str:
        from .policy import CONTEXT_VARIABLES

        if target is None:
            raise EvaluationError("action requires a target")
        if target in CONTEXT_VARIABLES:
            if target not in ctx:
                raise EvaluationError(f"unbound variable: {target}")
            bound = ctx[target]
            return bound[0] if isinstance(bound, tuple) else bound
        return target


# ---------------------------------------------------------------------------
# Replay
# ---------------------------------------------------------------------------


def replay(journal: Journal) -> MemoryState:
    """Reconstruct the final state by applying committed deltas from genesis."""
    state = journal.genesis_state()
    if state_digest(state) != journal.genesis_digest:
        raise CorruptJournalError("genesis digest mismatch")
    expected_tick = state.clock.tick
    for record in journal.records:
        if not record.committed:
            continue
        expected_tick += 1
        if record.tick != expected_tick:
            raise CorruptJournalError(f"non-consecutive tick at {record.tick}")
        for delta in record.deltas:
            apply_delta(state, delta)
        state.clock = Timestamp(record.tick)
        if state_digest(state) != record.digest_after:
            raise CorruptJournalError(f"digest mismatch at tick {record.tick}")
    return state
