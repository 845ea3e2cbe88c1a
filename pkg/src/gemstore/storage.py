"""On-disk formats: length-prefixed journal files and state snapshots.

Both formats carry a version header and content digests so truncation or
bit-rot surfaces as a corruption error instead of silent divergence.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

from .config import EngineConfig
from .engine import CorruptJournalError, Journal, TransitionRecord, replay
from .model import MemoryState, canonical_json, state_digest, state_from_dict, state_to_dict

JOURNAL_MAGIC = b"GEMJ"
SNAPSHOT_MAGIC = b"GEMS"
FORMAT_VERSION = 1


def _write_frame(fh, payload: bytes) -> None:
    fh.write(struct.pack(">I", len(payload)))
    fh.write(payload)


def _read_frame(fh) -> bytes:
    header = fh.read(4)
    if len(header) != 4:
        raise CorruptJournalError("truncated frame header")
    (length,) = struct.unpack(">I", header)
    payload = fh.read(length)
    if len(payload) != length:
        raise CorruptJournalError("truncated frame payload")
    return payload


def write_journal(path: str | Path, journal: Journal) -> None:
    with open(path, "wb") as fh:
        fh.write(JOURNAL_MAGIC)
        header = {
            "version": FORMAT_VERSION,
            "config": journal.config.to_dict(),
            "genesis": journal.genesis,
            "genesis_digest": journal.genesis_digest,
        }
        _write_frame(fh, canonical_json(header).encode("utf-8"))
        for record in journal.records:
            _write_frame(fh, canonical_json(record.to_dict()).encode("utf-8"))


def read_journal(path: str | Path) -> Journal:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != JOURNAL_MAGIC:
            raise CorruptJournalError("not a journal file")
        header = json.loads(_read_frame(fh))
        if header.get("version") != FORMAT_VERSION:
            raise CorruptJournalError(f"unsupported journal version: {header.get('version')}")
        journal = Journal(
            config=EngineConfig.from_dict(header["config"]),
            genesis=header["genesis"],
            genesis_digest=header["genesis_digest"],
        )
        while True:
            header4 = fh.read(4)
            if not header4:
                break
            if len(header4) != 4:
                raise CorruptJournalError("truncated frame header")
            (length,) = struct.unpack(">I", header4)
            payload = fh.read(length)
            if len(payload) != length:
                raise CorruptJournalError("truncated frame payload")
            journal.records.append(TransitionRecord.from_dict(json.loads(payload)))
    return journal


def write_snapshot(path: str | Path, state: MemoryState, config: EngineConfig) -> None:
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        payload = {
            "version": FORMAT_VERSION,
            "config": config.to_dict(),
            "state": state_to_dict(state),
            "digest": state_digest(state),
        }
        _write_frame(fh, canonical_json(payload).encode("utf-8"))


def read_snapshot(path: str | Path) -> tuple[MemoryState, EngineConfig]:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != SNAPSHOT_MAGIC:
            raise CorruptJournalError("not a snapshot file")
        payload = json.loads(_read_frame(fh))
        if payload.get("version") != FORMAT_VERSION:
            raise CorruptJournalError(f"unsupported snapshot version: {payload.get('version')}")
        state = state_from_dict(payload["state"])
        if state_digest(state) != payload["digest"]:
            raise CorruptJournalError("snapshot digest mismatch")
        return state, EngineConfig.from_dict(payload["config"])


def snapshot_from_journal(journal_path: str | Path, snapshot_path: str | Path) -> str:
    journal = read_journal(journal_path)
    state = replay(journal)
    write_snapshot(snapshot_path, state, journal.config)
    return state_digest(state)
