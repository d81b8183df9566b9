#!/usr/bin/env python3
"""End-to-end demo on synthetic data: ingest, fit, forest, rank.

Usage: python scripts/run_pipeline.py [--out DIR] [--seed N]
"""

import argparse
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
SRC = ROOT / "src"


def cli(*args: str) -> None:
    import os

    env = dict(os.environ, PYTHONPATH=str(SRC))
    proc = subprocess.run([sys.executable, "-m", "crashcount", *args], env=env)
    if proc.returncode != 0:
        sys.exit(proc.returncode)


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="demo_run")
    parser.add_argument("--seed", type=int, default=20160101)
    args = parser.parse_args()
    out = Path(args.out)

    subprocess.run(
        [
            sys.executable, str(ROOT / "scripts" / "make_synthetic_data.py"),
            "--out", str(out / "data"), "--seed", str(args.seed),
        ],
        check=True,
    )
    cli(
        "ingest",
        "--crash", str(out / "data" / "crashes.csv"),
        "--weather", str(out / "data" / "weather.csv"),
        "--from", "2016-01-01", "--to", "2019-12-31",
        "--out", str(out / "ingest"),
    )
    # model the calibrated grid: the uniform-event grid is deliberately flat
    cli(
        "fit",
        "--grid", str(out / "data" / "grid_calibrated.csv"),
        "--family", "auto",
        "--seed", str(args.seed),
        "--out", str(out / "fit"),
    )
    cli(
        "forest",
        "--grid", str(out / "data" / "grid_calibrated.csv"),
        "--trees", "25", "--sweep", "1,5,10,25",
        "--seed", str(args.seed),
        "--out", str(out / "forest"),
    )
    cli(
        "rank",
        "--artifact", str(out / "fit" / "model.json"),
        "--month", "6", "--precip", "0",
        "--out", str(out / "rank"),
    )
    print(f"\npipeline complete; artifacts under {out}/")
    print(f"serve the explorer with:\n  python -m crashcount serve "
          f"--artifact {out / 'fit' / 'model.json'} --static frontend/dist "
          f"--bind 127.0.0.1:8787")
    return 0


if __name__ == "__main__":
    sys.exit(main())
