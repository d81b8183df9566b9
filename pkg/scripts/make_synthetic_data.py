#!/usr/bin/env python3
"""Emit synthetic crash/weather CSVs and a calibrated grid for experiments.

Usage: python scripts/make_synthetic_data.py [--out DIR] [--seed N] [--events N]
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from crashcount.ingest import grid_to_csv  # noqa: E402
from crashcount.synth import (  # noqa: E402
    generate_calibrated_grid,
    synthetic_crash_csv,
    synthetic_weather_csv,
)


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="data_synth")
    parser.add_argument("--seed", type=int, default=20160101)
    parser.add_argument("--events", type=int, default=10_000)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    synthetic_crash_csv(out / "crashes.csv", n_events=args.events, seed=args.seed)
    synthetic_weather_csv(out / "weather.csv", seed=args.seed)
    grid, truth = generate_calibrated_grid(seed=args.seed)
    grid_to_csv(grid, out / "grid_calibrated.csv")
    print(f"wrote {out}/crashes.csv ({args.events} events)")
    print(f"wrote {out}/weather.csv (1461 days)")
    print(f"wrote {out}/grid_calibrated.csv (35064 cells, alpha={truth.alpha})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
