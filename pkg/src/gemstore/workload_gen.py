"""Seeded random workload generator for soak and property testing.

Workloads are built from a small fixed vocabulary so the same seed always
produces the same event stream.  Every ingest carries a topic hint and every
field name is scoped to its concept, which keeps the expected-current
bookkeeping unambiguous when the auditor replays the run.
"""

from __future__ import annotations

import random

from .operators import Fact, FactBundle, Query
from .workload import WorkloadEvent

_CONCEPT_WORDS = [
    "atlas", "beacon", "cedar", "delta", "ember", "fjord",
    "garnet", "harbor", "iris", "juniper", "krill", "lumen",
]

_FIELD_WORDS = ["deadline", "owner", "status", "budget", "venue", "priority"]

_VALUE_WORDS = [
    "march", "april", "june", "july", "amber", "blue", "crimson",
    "drafted", "approved", "blocked", "shipped", "paused",
]


def generate_workload(seed: int, length: int = 100, concepts: int = 8) -> list[WorkloadEvent]:
    """Deterministic event stream of the requested length."""
    rng = random.Random(seed)
    concept_ids = rng.sample(_CONCEPT_WORDS, min(concepts, len(_CONCEPT_WORDS)))
    fields_by_concept = {
        cid: [f"{cid}-{w}" for w in rng.sample(_FIELD_WORDS, rng.randint(2, 4))]
        for cid in concept_ids
    }

    events: list[WorkloadEvent] = []
    seeded: set[str] = set()

    def make_ingest() -> WorkloadEvent:
        cid = rng.choice(concept_ids)
        seeded.add(cid)
        names = fields_by_concept[cid]
        n_facts = rng.randint(1, min(2, len(names)))
        facts = tuple(
            Fact(name, f"{rng.choice(_VALUE_WORDS)}-{rng.randrange(100)}")
            for name in rng.sample(names, n_facts)
        )
        text = f"{cid} project update: " + ", ".join(f"{f.field} is {f.value}" for f in facts)
        return WorkloadEvent("ingest", bundle=FactBundle(facts=facts, text=text, topic_hint=cid))

    def make_query() -> WorkloadEvent:
        pool = sorted(seeded) or concept_ids
        cid = rng.choice(pool)
        name = rng.choice(fields_by_concept[cid])
        return WorkloadEvent("query", query=Query(text=f"{cid} {name.replace('-', ' ')}"))

    # warm up with one ingest so early queries have something to rank
    events.append(make_ingest())
    while len(events) < length:
        roll = rng.random()
        if roll < 0.45:
            events.append(make_ingest())
        elif roll < 0.70:
            events.append(make_query())
        elif roll < 0.90:
            events.append(WorkloadEvent("tick", count=rng.randint(1, 3)))
        elif roll < 0.95:
            events.append(WorkloadEvent("revise"))
        else:
            events.append(WorkloadEvent("forget"))
    return events[:length]
