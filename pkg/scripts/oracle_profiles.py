"""Displacement profiles and cycle tables from the integration oracle.

    python3 scripts/oracle_profiles.py [outdir]
"""

import sys
from pathlib import Path

from riccati_disc.cli import main as cli

PROBLEMS = Path(__file__).resolve().parent.parent / "problems"
CASES = ["gamma_minus_one", "ex0", "ex2", "ex3_general", "uve_nonvanishing"]


def main(outdir: Path) -> int:
    outdir.mkdir(parents=True, exist_ok=True)
    status = 0
    for name in CASES:
        print(f"== {name}")
        status |= cli(["oracle", str(PROBLEMS / f"{name}.json"),
                       "--out", str(outdir / f"{name}_profile.csv"),
                       "--cycles-out", str(outdir / f"{name}_cycles.csv")])
    return status


if __name__ == "__main__":
    sys.exit(main(Path(sys.argv[1] if len(sys.argv) > 1 else "results")))
