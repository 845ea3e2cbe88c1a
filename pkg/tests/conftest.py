from gemstore.config import EngineConfig
from gemstore.model import (
    Edge,
    EdgeKind,
    Field,
    MemoryState,
    Provenance,
    Timestamp,
    Topic,
    ValueEntry,
    fresh_embedding_for,
)
from gemstore.policy import default_policy_set


def build_topic(tid, title=None, fields=None, tick=1):
    """Topic with one history entry per field value."""
    title = title or tid.replace("-", " ")
    topic = Topic(id=tid, title=title, summary=title, embedding=None)
    for name, value in (fields or {}).items():
        f = Field(name=name, last_access=tick)
        f.history.append(ValueEntry(value, Timestamp(tick), (Provenance("seed", tick),)))
        topic.fields[name] = f
    topic.embedding = fresh_embedding_for(topic)
    return topic


def build_state(topics=(), edges=(), policies=None, tick=0):
    state = MemoryState(policies=default_policy_set() if policies is None else policies)
    for topic in topics:
        state.topics[topic.id] = topic
    for src, dst, kind in edges:
        e = Edge(src, dst, EdgeKind(kind), Timestamp(0))
        state.edges[e.key()] = e
    state.clock = Timestamp(tick)
    return state


def small_config(**overrides):
    cfg = EngineConfig(**overrides)
    cfg.validate()
    return cfg
