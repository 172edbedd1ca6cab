"""Run every INI file in scripts/configs through the CLI and print the exit codes."""

import sys
from pathlib import Path

from dysonlab.cli import main

HERE = Path(__file__).resolve().parent


def run_all(out_root: Path) -> int:
    worst = 0
    for cfg in sorted((HERE / "configs").glob("*.ini")):
        code = main(["run", str(cfg), "--out", str(out_root / cfg.stem)])
        print(f"{cfg.name:20s} exit {code}")
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else HERE.parent / "results"
    sys.exit(run_all(out))
