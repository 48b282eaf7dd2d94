"""Data behind the three family plots (orders 3, 8 and 15).

Each configuration writes an anchor CSV and an envelope CSV through the
command-line front end, so the files match ``riccati-disc family`` output.

    python3 scripts/family_figures.py [outdir]
"""

import sys
from pathlib import Path

from riccati_disc.cli import main as cli

PROBLEM = Path(__file__).resolve().parent.parent / "problems" / "ex3_family.json"

# (label, order, grid flag, grid size)
CONFIGS = [
    ("order3", 3, "--points", 5),
    ("order8", 8, "--intervals", 20),
    ("order15", 15, "--intervals", 30),
]


def main(outdir: Path) -> int:
    outdir.mkdir(parents=True, exist_ok=True)
    status = 0
    for label, order, flag, size in CONFIGS:
        print(f"== {label}")
        status |= cli(["family", str(PROBLEM), "--order", str(order), flag, str(size),
                       "--anchors-out", str(outdir / f"family_{label}_anchors.csv"),
                       "--envelope-out", str(outdir / f"family_{label}_envelope.csv")])
    return status


if __name__ == "__main__":
    sys.exit(main(Path(sys.argv[1] if len(sys.argv) > 1 else "results")))
