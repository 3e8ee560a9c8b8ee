"""Flow-balance bound on stationary states of the SIRS rules.

At a stationary state the mean I -> R flow equals the mean R -> S flow.  Every
infected node recovers with probability at least 1 - exp(-c1) (reached when all its
neighbours are infected), so  p_rs [R] >= (1 - exp(-c1)) [I].  The script prints the
smallest [R] compatible with a given [I] and checks a candidate ([S], [I]).

    python scripts/stationary_balance.py [S I]
"""

import math
import sys

C1, P_RS = 0.1, 0.2


def min_recovered(i: float) -> float:
    return (1 - math.exp(-C1)) * i / P_RS


def main(args):
    s, i = (float(v) for v in args) if args else (0.034, 0.903)
    need = min_recovered(i)
    have = 1 - s - i
    print(f"[I] = {i}: stationarity needs [R] >= {need:.4f}; candidate has [R] = {have:.4f}")
    print("feasible" if have >= need - 1e-12 else "infeasible under these rules")
    print(f"largest stationary [I] with [S] >= 0: {1 / (1 + (1 - math.exp(-C1)) / P_RS):.4f}")


if __name__ == "__main__":
    main(sys.argv[1:])
