#!/usr/bin/env python3
"""Differential run of the deadline workload: governed engine vs the
append-only CRUD baseline.  Writes the per-tick comparison CSV."""

import sys
from pathlib import Path

from gemstore import BaselineJournalAdapter, Engine, EngineConfig
from gemstore.workload import compare, load_workload, rows_to_csv

WORKLOAD = Path(__file__).resolve().parent.parent / "workloads" / "deadline.workload"


def main() -> int:
    out_path = Path(sys.argv[1]) if len(sys.argv) > 1 else None
    events = load_workload(WORKLOAD)
    config = EngineConfig()
    rows = compare(events, Engine(config=config), BaselineJournalAdapter(config, capacity=5))
    csv_text = rows_to_csv(rows)
    if out_path:
        out_path.write_text(csv_text, encoding="utf-8")
        print(f"wrote {out_path}")
    else:
        sys.stdout.write(csv_text)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
