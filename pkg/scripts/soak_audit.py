#!/usr/bin/env python3
"""Soak test: run many seeded random workloads and audit every journal.
Usage: soak_audit.py [n_workloads] [events_per_workload]"""

import sys
import time

from gemstore import Engine
from gemstore.audit import audit
from gemstore.operators import Query
from gemstore.workload import run_workload
from gemstore.workload_gen import generate_workload

PROBES = [Query(text="atlas deadline"), Query(text="harbor owner status")]


def main() -> int:
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 200
    length = int(sys.argv[2]) if len(sys.argv) > 2 else 100
    t0 = time.time()
    failures = 0
    for seed in range(n):
        engine = Engine()
        run_workload(engine, generate_workload(seed, length=length))
        report = audit(engine.journal, PROBES)
        if not report.passed:
            failures += 1
            print(f"seed {seed}: {report.totals()}")
    elapsed = time.time() - t0
    print(f"{n} workloads x {length} events, {failures} failures, {elapsed:.1f}s")
    return 0 if failures == 0 else 1


if __name__ == "__main__":
    raise SystemExit(main())
