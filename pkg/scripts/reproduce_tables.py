"""Harmonic-balance bound tables for the two worked examples.

Prints the mu_lower / mu_upper bracket per order and writes one CSV per
example (columns order, mu_lo, mu_hi) into the output directory.

    python3 scripts/reproduce_tables.py [outdir]
"""

import csv
import sys
from pathlib import Path

from riccati_disc import PeriodicFn, TrigPoly, bifurcation_scan, center, hb_sequence

EXAMPLES = {
    "example1": center(PeriodicFn.from_expr("(45*cos(t)^2 - 29)/(3*cos(t) - 5)^2")),
    "example2": TrigPoly.from_terms(sin={1: 1.0}),
}


def main(outdir: Path) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    for name, gamma in EXAMPLES.items():
        rows = []
        print(f"{name}")
        for s in hb_sequence(gamma, 6):
            b = s.bracket
            rows.append((s.order, b.lo, b.hi))
            print(f"  n={s.order}  [{b.lo:+.6f}, {b.hi:+.6f}]")
        if name == "example2":
            o = bifurcation_scan(gamma).bracket
            print(f"  oracle mu* in [{o.lo:.9f}, {o.hi:.9f}]")
        with open(outdir / f"{name}_bounds.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["order", "mu_lo", "mu_hi"])
            w.writerows((n, f"{lo:.17g}", f"{hi:.17g}") for n, lo, hi in rows)


if __name__ == "__main__":
    main(Path(sys.argv[1] if len(sys.argv) > 1 else "results"))
