"""Forward simulations across the infection-probability sweep.

Prints the long-run [S], [I] of every run (mean over the last 500 steps), which is
where hysteresis would show up as two plateaus for one p_si.

    python scripts/temporal_regimes.py [section.key=value ...]
"""

import sys
from collections import defaultdict

import numpy as np

from _common import read_rows, run_config


def main(overrides):
    rows = read_rows(run_config("temporal", overrides))
    runs = defaultdict(list)
    for r in rows:
        runs[(float(r["p_si"]), r["ic_label"])].append((float(r["S"]), float(r["I"])))
    print(f"{'p_si':>6} {'start':>6} {'[S]':>8} {'[I]':>8}")
    for (p, label), traj in sorted(runs.items(), key=lambda kv: (-kv[0][0], kv[0][1])):
        s, i = np.mean(traj[-500:], axis=0)
        print(f"{p:6.3f} {label:>6} {s:8.4f} {i:8.4f}")


if __name__ == "__main__":
    main(sys.argv[1:])
