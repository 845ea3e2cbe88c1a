"""Deterministic signed feature-hash embeddings and the topic router.

Model-free stand-in for a dense embedding: tokens are hashed with a fixed
64-bit hash (BLAKE2b), bucketed into 256 dimensions with a sign bit, and
accumulated.  Identical text yields component-exact identical vectors on
every platform, which is what makes journal replay reproducible.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING, Optional

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .model import MemoryState

DIM = 256

_TOKEN_RE = re.compile(r"[a-z0-9]+")


class RoutingError(ValueError):
    """topic_hint points at a topic the router cannot use."""


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def _token_hash(token: str) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


@dataclass(eq=False)
class EmbeddingVector:
    components: np.ndarray  # float64, length DIM, integer-valued
    norm: float

    def to_list(self) -> list[int]:
        return [int(c) for c in self.components]

    @staticmethod
    def from_list(values: list) -> "EmbeddingVector":
        arr = np.asarray(values, dtype=np.float64)
        return EmbeddingVector(arr, float(np.linalg.norm(arr)))


@lru_cache(maxsize=8192)
def _embed_tuple(text: str) -> tuple[int, ...]:
    vec = [0] * DIM
    for token in tokenize(text):
        h = _token_hash(token)
        bucket = h % DIM
        sign = -1 if (h >> 63) & 1 else 1
        vec[bucket] += sign
    return tuple(vec)


def embed(text: str) -> EmbeddingVector:
    arr = np.asarray(_embed_tuple(text), dtype=np.float64)
    return EmbeddingVector(arr, float(np.linalg.norm(arr)))


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    if a.norm == 0.0 or b.norm == 0.0:
        return 0.0
    return float(np.dot(a.components, b.components)) / (a.norm * b.norm)


@dataclass(frozen=True)
class HostChoice:
    topic_id: Optional[str]  # None means create a new topic
    score: float


def select_host(state: "MemoryState", text: str, topic_hint: Optional[str], tau_topic: float) -> HostChoice:
    """Pick the host topic for an incoming bundle.

    A live topic_hint wins outright.  A hint naming an archived topic follows
    its merge marker if one exists, otherwise it is a routing error.  A hint
    naming no topic at all requests creation under that id.  Without a hint
    the best cosine match wins if it clears tau_topic; ties break to the
    lexicographically smallest topic id.
    """
    if topic_hint is not None:
        topic = state.topics.get(topic_hint)
        if topic is None:
            return HostChoice(None, 0.0)
        if topic.archived:
            if topic.merged_into is not None and topic.merged_into in state.topics:
                merged = state.topics[topic.merged_into]
                if not merged.archived:
                    return HostChoice(merged.id, 1.0)
            raise RoutingError(f"topic_hint names archived topic: {topic_hint}")
        return HostChoice(topic.id, 1.0)

    query = embed(text)
    best_id: Optional[str] = None
    best_score = 0.0
    for tid in sorted(state.topics):
        topic = state.topics[tid]
        if topic.archived:
            continue
        score = cosine(query, topic.embedding)
        if score > best_score:
            best_id, best_score = tid, score
    if best_id is not None and best_score >= tau_topic:
        return HostChoice(best_id, best_score)
    return HostChoice(None, best_score)
