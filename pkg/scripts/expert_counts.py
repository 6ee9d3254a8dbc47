#!/usr/bin/env python3
"""Max active experts per schedule as the horizon grows (CSV on stdout)."""

from __future__ import annotations

import argparse
import csv
import sys

from eflh.schedule import ScheduleKind, active_counts


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--max-log2T", type=int, default=20)
    ap.add_argument("--epsilons", default="0.1,0.3,0.49")
    args = ap.parse_args()

    kinds = [("eflh-basic", ScheduleKind.basic()), ("flh-baseline", ScheduleKind.dyadic())]
    for e in map(float, args.epsilons.split(",")):
        kinds.append((f"eflh-full(eps={e})", ScheduleKind.full(e)))
        kinds.append((f"eflh-exp(eps={e})", ScheduleKind.largest(e)))

    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["log2T", "schedule", "max_active"])
    for j in range(4, args.max_log2T + 1):
        for name, kind in kinds:
            w.writerow([j, name, int(active_counts(kind, 2**j).max())])


if __name__ == "__main__":
    main()
