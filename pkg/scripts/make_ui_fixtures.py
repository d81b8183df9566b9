#!/usr/bin/env python3
"""Build the frontend test fixtures from one deterministic artifact.

Writes, under frontend/tests/fixtures/:
  model_document.json    the /api/v1/model payload
  heatmap_*.json         /api/v1/heatmap payloads for fixed queries
  sessions.json          three scripted what-if sessions, each carrying the
                         exact `crashcount rank --json` output for its slots
  artifact.json          the model artifact the sessions were ranked against
"""

import json
import os
import subprocess
import sys
from datetime import date
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
SRC = ROOT / "src"
sys.path.insert(0, str(SRC))

from crashcount.advisor import save_model, summarize  # noqa: E402
from crashcount.features import FeatureSchema, build_design  # noqa: E402
from crashcount.glm import dispersion_check, fit_negbin, fit_poisson  # noqa: E402
from crashcount.ingest import DateRange  # noqa: E402
from crashcount.service import ServiceState  # noqa: E402
from crashcount.advisor import load_model  # noqa: E402
from crashcount.synth import generate_calibrated_grid  # noqa: E402

SESSIONS = [
    {
        "name": "june-morning-commute",
        "month": 6,
        "precip": 0,
        "slots": "MO:7,MO:8,TU:8,WE:8,TH:9,FR:8",
    },
    {
        "name": "november-rainy-week",
        "month": 11,
        "precip": 1,
        "slots": "MO:8,TU:14,WE:2,TH:17,FR:2,SA:11,SU:9",
    },
    {
        "name": "single-slot-check",
        "month": 2,
        "precip": 0,
        "slots": "WE:8",
    },
]


def cli_json(*args: str):
    env = dict(os.environ, PYTHONPATH=str(SRC))
    proc = subprocess.run(
        [sys.executable, "-m", "crashcount", *args],
        capture_output=True, text=True, env=env, check=True,
    )
    return json.loads(proc.stdout)


def main() -> int:
    fixtures = ROOT / "frontend" / "tests" / "fixtures"
    fixtures.mkdir(parents=True, exist_ok=True)

    grid, _ = generate_calibrated_grid(
        seed=20160101, date_range=DateRange(date(2016, 1, 1), date(2016, 12, 31))
    )
    design = build_design(grid, FeatureSchema())
    poisson = fit_poisson(design)
    from dataclasses import asdict

    report = dispersion_check(poisson, design)
    model = fit_negbin(design)
    artifact_path = fixtures / "artifact.json"
    save_model(
        model, artifact_path,
        summary_rows=summarize(model, grid), dispersion=asdict(report),
    )

    state = ServiceState(load_model(artifact_path))
    (fixtures / "model_document.json").write_text(
        json.dumps(state.handle_model(), sort_keys=True, indent=1) + "\n"
    )
    for month, precip in ((6, 0), (6, 1), (11, 1)):
        doc = state.handle_heatmap({"month": [str(month)], "precip": [str(precip)]})
        (fixtures / f"heatmap_m{month}_p{precip}.json").write_text(
            json.dumps(doc, sort_keys=True, indent=1) + "\n"
        )

    sessions = []
    for spec in SESSIONS:
        ranked = cli_json(
            "rank", "--artifact", str(artifact_path),
            "--month", str(spec["month"]),
            "--precip", str(spec["precip"]),
            "--slots", spec["slots"],
            "--json",
        )
        sessions.append(
            {
                "name": spec["name"],
                "month": spec["month"],
                "precip": spec["precip"],
                "slots": [
                    {"weekday": token.split(":")[0], "hour": int(token.split(":")[1]),
                     "month": spec["month"]}
                    for token in spec["slots"].split(",")
                ],
                "cli_ranked": ranked,
                "fingerprint": state.fingerprint,
            }
        )
    (fixtures / "sessions.json").write_text(
        json.dumps(sessions, sort_keys=True, indent=1) + "\n"
    )
    print(f"fixtures written under {fixtures}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
