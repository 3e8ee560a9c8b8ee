"""Trajectories launched with the same ([S], [I]) but different [SI].

Prints [SI] against [I] at a few times; the spread in [SI] collapses within a few
steps, which is the fast relaxation the healing step relies on.

    python scripts/slow_manifold.py [section.key=value ...]
"""

import sys
from collections import defaultdict

from _common import read_rows, run_config


def main(overrides):
    rows = read_rows(run_config("portrait", overrides))
    by_t = defaultdict(list)
    for r in rows:
        by_t[int(r["t"])].append((float(r["I"]), float(r["SI"])))
    for t in (0, 2, 5, 10, max(by_t)):
        pts = sorted(by_t[t])
        si = [v for _, v in pts]
        print(f"t={t:3d}  [SI] range {min(si):.4f}..{max(si):.4f}  "
              + " ".join(f"({i:.3f},{v:.3f})" for i, v in pts))


if __name__ == "__main__":
    main(sys.argv[1:])
