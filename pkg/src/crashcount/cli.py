"""Batch entry point: ingest | fit | forest | rank | serve.

Every command is deterministic given its flags; all randomness flows from
the single --seed flag through named substreams. Output directories get an
echoed config plus sha256 fingerprints of the inputs for provenance.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from dataclasses import asdict
from datetime import date
from pathlib import Path
from typing import Optional, Sequence

from . import advisor, features, forest, glm, ingest
from .errors import DataError, NumericError

DEFAULT_SEED = 20160101

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def substream_seed(seed: int, name: str) -> int:
    """Named deterministic child seed derived from the master seed."""
    digest = hashlib.sha256(f"{seed}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_provenance(out_dir: Path, args: argparse.Namespace, inputs: dict[str, Path]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    config = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k != "func"}
    (out_dir / "config.json").write_text(
        json.dumps(config, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )
    fingerprints = {name: _sha256_file(p) for name, p in inputs.items() if p and p.exists()}
    (out_dir / "input_fingerprints.json").write_text(
        json.dumps(fingerprints, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )


def _parse_date(text: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError as exc:
        raise DataError(f"bad date {text!r} (expected YYYY-MM-DD)") from exc


def _date_range(args: argparse.Namespace) -> ingest.DateRange:
    return ingest.DateRange(_parse_date(args.from_date), _parse_date(args.to_date))


def _schema(args: argparse.Namespace) -> features.FeatureSchema:
    coding = features.FULL_DUMMY if args.coding == "full-dummy" else features.REFERENCE_CELL
    return features.FeatureSchema(coding=coding, include_precip=True, precip_mode=args.precip)


def cmd_ingest(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    crash_path, weather_path = Path(args.crash), Path(args.weather)
    for p in (crash_path, weather_path):
        if not p.exists():
            raise DataError(f"input file not found: {p}")
    rng_dates = _date_range(args)
    crashes = ingest.parse_crash_csv(crash_path, rng_dates)
    weather = ingest.parse_weather_csv(weather_path, rng_dates)
    grid = ingest.build_hourly_grid(crashes.records, weather.records, rng_dates)
    _write_provenance(out_dir, args, {"crash": crash_path, "weather": weather_path})
    ingest.grid_to_csv(grid, out_dir / "grid.csv")
    report = {
        "crash_rows_kept": len(crashes.records),
        "crash_duplicate_ids": crashes.duplicate_ids,
        "crash_unparseable_timestamps": crashes.unparseable_timestamps,
        "crash_out_of_range": crashes.out_of_range,
        "crash_blank_ids": crashes.blank_ids,
        "weather_rows": len(weather.records),
        "weather_duplicate_dates_resolved": weather.duplicate_dates_resolved,
        "weather_missing_precipitation": weather.missing_precipitation,
        "grid_rows": len(grid),
        "grid_zero_crash_hours": sum(1 for o in grid if o.crash_count == 0),
        "grid_total_crashes": sum(o.crash_count for o in grid),
    }
    (out_dir / "ingest_report.json").write_text(
        json.dumps(report, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )
    print(f"wrote {out_dir / 'grid.csv'} ({report['grid_rows']} rows, "
          f"{report['grid_total_crashes']} crashes)")
    return EXIT_OK


def _load_grid(args: argparse.Namespace) -> list[ingest.HourlyObservation]:
    grid_path = Path(args.grid)
    if not grid_path.exists():
        raise DataError(f"grid file not found: {grid_path}")
    return ingest.grid_from_csv(grid_path)


def cmd_fit(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    grid = _load_grid(args)
    schema = _schema(args)
    design = features.build_design(grid, schema)
    split_seed = substream_seed(args.seed, "split")
    train_idx, test_idx = features.split_indices(
        design.n, args.split_frac, split_seed, args.split
    )
    train, test = design.subset(train_idx), design.subset(test_idx)
    train_grid = [grid[i] for i in train_idx]

    poisson = glm.fit_poisson(train)
    dispersion = glm.dispersion_check(poisson, train)
    print(
        "dispersion: pearson_ratio={:.4f} ct_coefficient={:.6f} ct_p_value={:.6f} "
        "overdispersed={}".format(
            dispersion.pearson_ratio,
            dispersion.ct_coefficient,
            dispersion.ct_p_value,
            dispersion.overdispersed,
        )
    )
    family = args.family
    if family == "auto":
        family = "negbin" if dispersion.overdispersed else "poisson"
        print(f"family auto-selected: {family}")
    model = glm.fit_negbin(train) if family == "negbin" else poisson
    if model.alpha_pinned:
        print("warning: dispersion pinned at lower bound; data consistent with Poisson")
    if not model.identifiable:
        print("warning: full-dummy coding is not identifiable; "
              "coefficients are the minimum-norm representative")

    rows = advisor.summarize(model, train_grid)
    _write_provenance(out_dir, args, {"grid": Path(args.grid)})
    advisor.save_model(
        model,
        out_dir / "model.json",
        summary_rows=rows,
        dispersion=asdict(dispersion),
    )
    advisor.summary_to_csv(rows, out_dir / "summary.csv")
    for category in ("hour", "weekday", "month"):
        cat_rows = [r for r in rows if r.category == category]
        with open(out_dir / f"coeffs_{category}.csv", "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(("name", "coefficient", "exp_coef", "percent_change", "crash_share"))
            for r in cat_rows:
                writer.writerow(
                    (r.name, repr(r.coefficient), repr(r.exp_coef),
                     repr(r.percent_change), repr(r.crash_share))
                )
    metrics = {
        "family": model.family,
        "alpha": model.alpha,
        "log_likelihood": model.log_likelihood,
        "iterations": model.iterations,
        "train_rmse": glm.rmse(model, train),
        "test_rmse": glm.rmse(model, test),
        "n_train": train.n,
        "n_test": test.n,
    }
    (out_dir / "metrics.json").write_text(
        json.dumps(metrics, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )
    print(f"wrote {out_dir / 'model.json'} (family={model.family}, "
          f"test rmse={metrics['test_rmse']:.4f})")
    return EXIT_OK


def cmd_forest(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    grid = _load_grid(args)
    schema = _schema(args)
    design = features.build_design(grid, schema)
    forest_seed = substream_seed(args.seed, "forest")
    params = forest.ForestParams(
        n_estimators=args.trees,
        max_depth=args.max_depth,
        min_samples_leaf=args.min_samples_leaf,
    )
    _write_provenance(out_dir, args, {"grid": Path(args.grid)})

    sizes = [int(s) for s in args.sweep.split(",")] if args.sweep else None
    if sizes:
        rows = forest.estimator_sweep(
            design, sizes, forest_seed, params=params, test_fraction=args.split_frac
        )
        forest.sweep_to_csv(rows, out_dir / "sweep.csv")
        for row in rows:
            print(f"n_trees={row.n_trees} mae={row.mae:.4f} r2={row.r2:.4f}")

    train, test = features.split(design, args.split_frac, forest_seed)
    model = forest.fit_forest(train, params, seed=forest_seed)
    ev = forest.evaluate(model, test)
    advisor.save_model(model, out_dir / "forest.json")
    with open(out_dir / "importance.csv", "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(("feature", "importance"))
        for name, imp in zip(model.feature_names, model.importance):
            writer.writerow((name, repr(float(imp))))
    print(f"wrote {out_dir / 'forest.json'} (trees={args.trees}, "
          f"mae={ev.mae:.4f}, r2={ev.r2:.4f})")
    return EXIT_OK


def _parse_slots(args: argparse.Namespace) -> tuple[advisor.Slot, ...]:
    month = args.month
    if not 1 <= month <= 12:
        raise DataError(f"month {month} out of range 1..12")
    if args.slots:
        slots = []
        for token in args.slots.split(","):
            token = token.strip()
            try:
                wd_label, hour_text = token.split(":")
                weekday = ingest.WEEKDAY_LABELS.index(wd_label.upper())
                hour = int(hour_text)
            except (ValueError, IndexError) as exc:
                raise DataError(
                    f"bad slot {token!r} (expected WEEKDAY:HOUR, e.g. MO:8)"
                ) from exc
            slots.append(advisor.Slot(weekday=weekday, hour=hour, month=month))
        return tuple(slots)
    return advisor.all_slots_for_month(month)


def cmd_rank(args: argparse.Namespace) -> int:
    loaded = advisor.load_model(Path(args.artifact))
    if loaded.kind == "forest" and not args.allow_forest:
        raise DataError(
            "artifact is a forest; the default ranking model is the GLM "
            "(pass --allow-forest to rank with it)"
        )
    query = advisor.SlotQuery(slots=_parse_slots(args), precip=args.precip)
    ranked = advisor.rank_slots(loaded.model, query)
    payload = [r.to_json_dict() for r in ranked]
    if args.json:
        print(json.dumps(payload, sort_keys=True, indent=1))
    else:
        print(f"# {advisor.RISK_CAVEAT}")
        print(f"{'rank':>4}  {'slot':<12} {'expected':>10} {'rel_risk':>9}")
        for r in ranked:
            slot = f"{ingest.WEEKDAY_LABELS[r.weekday]} {r.hour:02d}:00 m{r.month:02d}"
            print(f"{r.rank:>4}  {slot:<12} {r.expected_count:>10.4f} {r.relative_risk:>9.4f}")
    if args.out:
        out_dir = Path(args.out)
        _write_provenance(out_dir, args, {"artifact": Path(args.artifact)})
        (out_dir / "ranked.json").write_text(
            json.dumps(payload, sort_keys=True, indent=1) + "\n", encoding="utf-8"
        )
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    from . import service

    host, _, port_text = args.bind.rpartition(":")
    if not host or not port_text.isdigit():
        raise DataError(f"bad --bind {args.bind!r} (expected HOST:PORT)")
    server = service.create_server(
        Path(args.artifact), host=host, port=int(port_text),
        static_dir=Path(args.static) if args.static else None,
    )
    print(f"serving on http://{server.server_address[0]}:{server.server_address[1]}/")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crashcount",
        description="Hourly crash-count modeling and commute-slot advisor.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--seed", type=int, default=DEFAULT_SEED)
        p.add_argument("--out", required=True, help="output directory")

    p_ingest = sub.add_parser("ingest", help="parse, clean and grid the input CSVs")
    p_ingest.add_argument("--crash", required=True)
    p_ingest.add_argument("--weather", required=True)
    p_ingest.add_argument("--from", dest="from_date", default="2016-01-01")
    p_ingest.add_argument("--to", dest="to_date", default="2019-12-31")
    add_common(p_ingest)
    p_ingest.set_defaults(func=cmd_ingest)

    def add_model_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--grid", required=True, help="grid CSV from the ingest step")
        p.add_argument("--coding", choices=("reference", "full-dummy"), default="reference")
        p.add_argument("--precip", choices=("indicator", "inches"), default="indicator")
        p.add_argument("--split", choices=("random", "chrono"), default="random")

    p_fit = sub.add_parser("fit", help="fit Poisson, test dispersion, escalate to NB")
    add_model_common(p_fit)
    p_fit.add_argument("--family", choices=("auto", "poisson", "negbin"), default="auto")
    p_fit.add_argument("--split-frac", type=float, default=0.2)
    add_common(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_forest = sub.add_parser("forest", help="random-forest fit, sweep and importances")
    add_model_common(p_forest)
    p_forest.add_argument("--trees", type=int, default=100)
    p_forest.add_argument("--sweep", default="", help="comma-separated ensemble sizes")
    p_forest.add_argument("--split-frac", type=float, default=0.25)
    p_forest.add_argument("--max-depth", type=int, default=None)
    p_forest.add_argument("--min-samples-leaf", type=int, default=1)
    add_common(p_forest)
    p_forest.set_defaults(func=cmd_forest)

    p_rank = sub.add_parser("rank", help="rank commute slots by expected crash count")
    p_rank.add_argument("--artifact", required=True, help="model.json from the fit step")
    p_rank.add_argument("--month", type=int, required=True)
    p_rank.add_argument("--precip", type=float, default=0.0,
                        help="precipitation assumption (0/1 indicator or inches)")
    p_rank.add_argument("--slots", default="",
                        help="comma-separated WEEKDAY:HOUR pairs; default all 7x24")
    p_rank.add_argument("--allow-forest", action="store_true",
                        help="permit ranking with a forest artifact")
    p_rank.add_argument("--json", action="store_true")
    p_rank.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_rank.add_argument("--out", default="", help="optional output directory")
    p_rank.set_defaults(func=cmd_rank)

    p_serve = sub.add_parser("serve", help="serve the JSON API and web UI")
    p_serve.add_argument("--artifact", required=True)
    p_serve.add_argument("--bind", default="127.0.0.1:8787")
    p_serve.add_argument("--static", default="", help="directory of built UI assets")
    p_serve.set_defaults(func=cmd_serve)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"crashcount: error: data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"crashcount: error: numeric: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
