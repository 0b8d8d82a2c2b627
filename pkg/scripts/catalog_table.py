"""Per-machine service counts for the default catalog, one or two floors."""

import argparse

from ftfloor import catalog as C
from ftfloor import topology


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--floors", type=int, default=1, choices=(1, 2))
    args = ap.parse_args()
    cat = C.generate(topology.default_topology(args.floors))
    print(C.counts_table(cat))
    if args.floors == 2:
        print(f"all floors: {len(cat)} services")


if __name__ == "__main__":
    main()
