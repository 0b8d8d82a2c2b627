"""Latency of condition lookups over the full default knowledge base."""

import argparse
import statistics
import time

from ftfloor import catalog as C
from ftfloor import kb as K
from ftfloor import topology


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rounds", type=int, default=5)
    ap.add_argument("--floors", type=int, default=1, choices=(1, 2))
    args = ap.parse_args()

    cat = C.generate(topology.default_topology(args.floors))
    kb = C.load_catalog_kb(cat)
    times = []
    for _ in range(args.rounds):
        for url in cat.services:
            for role in ("pre", "post"):
                t0 = time.perf_counter()
                K.conditions_of(kb, url, role)
                times.append(time.perf_counter() - t0)
    times.sort()
    ms = [t * 1000 for t in times]
    print(f"triples={len(kb)} services={len(cat)} queries={len(ms)}")
    print(f"median={statistics.median(ms):.4f} ms  p95={ms[int(0.95 * len(ms))]:.4f} ms  max={ms[-1]:.4f} ms")


if __name__ == "__main__":
    main()
