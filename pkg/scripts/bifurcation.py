"""Coarse bifurcation diagram: continuation of fixed points of the coarse map in p_si.

    python scripts/bifurcation.py [--quick] [section.key=value ...]

``--quick`` uses the 10,000-node configuration.  Prints the stability segments and
turning points found along the branch.
"""

import sys

from _common import read_rows, run_config


def main(args):
    name = "continuation_10k" if "--quick" in args else "continuation"
    out = run_config(name, [a for a in args if a != "--quick"])
    rows = read_rows(out)
    if not rows:
        print("no branch points; see the status footer of", out)
        return
    seg_start = rows[0]
    for prev, row in zip(rows, rows[1:] + [None]):
        if row is None or row["stable"] != prev["stable"]:
            kind = "stable" if prev["stable"] == "1" else "unstable"
            print(f"{kind:>8}: p_si {float(seg_start['p_si']):.4f} -> {float(prev['p_si']):.4f}, "
                  f"[I] {float(seg_start['I']):.4f} -> {float(prev['I']):.4f}")
            seg_start = row
    with open(out, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith(("# fold", "# status")):
                print(line[2:].rstrip())


if __name__ == "__main__":
    main(sys.argv[1:])
