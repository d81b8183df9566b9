"""Decision layer: coefficient summary tables, slot ranking, persistence.

Ranking uses expected crash count as the risk proxy. No exposure or
traffic-volume normalization is applied (none is available), so a busy
hour ranks as riskier even if its per-trip risk is lower; outputs carry
that caveat.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import IO, Optional, Sequence, Union

import numpy as np

from .errors import DataError
from .features import PRECIP_INDICATOR, REFERENCE_CELL, FeatureSchema
from .forest import ForestModel, ForestParams, Tree, predict_forest_matrix
from .glm import FittedGlm, WaldStat, percent_change, predict_mean, wald_inference
from .ingest import HourlyObservation, MONTH_LABELS, WEEKDAY_LABELS

RISK_CAVEAT = (
    "Rankings compare expected crash counts, not per-trip risk; "
    "no traffic-volume exposure adjustment is applied."
)

ARTIFACT_FORMAT = "crashcount-model"
ARTIFACT_VERSION = "1.0"

SUMMARY_CSV_HEADER = (
    "name,coefficient,exp_coef,percent_change,std_err,z,p_value,crash_total,crash_share"
)


@dataclass(frozen=True)
class CoefficientRow:
    name: str
    category: str  # intercept | hour | weekday | month | precip
    coefficient: float
    exp_coef: float
    percent_change: float
    std_err: float
    z: float
    p_value: float
    crash_total: int
    crash_share: float
    reference: bool = False
    degenerate: bool = False


def _wald_by_name(model: FittedGlm) -> dict[str, WaldStat]:
    return {w.name: w for w in wald_inference(model)}


def summarize(model: FittedGlm, grid: Sequence[HourlyObservation]) -> list[CoefficientRow]:
    """Figure-style table: one row per level, with crash totals and shares.

    Under reference-cell coding the dropped levels appear with coefficient 0
    and the reference marker set.
    """
    if not grid:
        raise DataError("summarize needs a non-empty observation grid")
    schema = model.schema
    if model.p != len(schema.column_names) or model.column_names != schema.column_names:
        raise DataError("model columns do not match its schema")

    hour_totals = [0] * 24
    weekday_totals = [0] * 7
    month_totals = [0] * 12
    precip_total = 0
    grand = 0
    for obs in grid:
        c = obs.crash_count
        grand += c
        hour_totals[obs.hour] += c
        weekday_totals[obs.weekday] += c
        month_totals[obs.month - 1] += c
        if obs.precip_indicator:
            precip_total += c

    coef = dict(zip(model.column_names, model.beta))
    wald = _wald_by_name(model)

    def row(name: str, category: str, total: int, is_ref: bool) -> CoefficientRow:
        if is_ref:
            c, se, z, p, degenerate = 0.0, 0.0, 0.0, 1.0, False
        else:
            c = float(coef[name])
            w = wald[name]
            se, z, p, degenerate = w.std_err, w.z, w.p_value, w.degenerate
        return CoefficientRow(
            name=name,
            category=category,
            coefficient=c,
            exp_coef=math.exp(c),
            percent_change=percent_change(c),
            std_err=se,
            z=z,
            p_value=p,
            crash_total=total,
            crash_share=(total / grand) if grand > 0 else 0.0,
            reference=is_ref,
        )

    ref_h, ref_w, ref_m = schema.reference
    is_ref_coding = schema.coding == REFERENCE_CELL
    rows: list[CoefficientRow] = []
    if is_ref_coding:
        w0 = wald["Intercept"]
        rows.append(
            CoefficientRow(
                name="Intercept",
                category="intercept",
                coefficient=float(coef["Intercept"]),
                exp_coef=math.exp(float(coef["Intercept"])),
                percent_change=percent_change(float(coef["Intercept"])),
                std_err=w0.std_err,
                z=w0.z,
                p_value=w0.p_value,
                crash_total=grand,
                crash_share=1.0 if grand > 0 else 0.0,
                degenerate=w0.degenerate,
            )
        )
    for h in range(24):
        name = f"Hour_{h}"
        rows.append(row(name, "hour", hour_totals[h], is_ref_coding and h == ref_h))
    if schema.include_precip:
        rows.append(row("Precipitation", "precip", precip_total, False))
    for wd in range(7):
        name = WEEKDAY_LABELS[wd]
        rows.append(row(name, "weekday", weekday_totals[wd], is_ref_coding and wd == ref_w))
    for m in range(1, 13):
        name = MONTH_LABELS[m - 1]
        rows.append(row(name, "month", month_totals[m - 1], is_ref_coding and m == ref_m))
    return rows


def summary_to_csv(rows: Sequence[CoefficientRow], sink: Union[str, Path, IO[str]]) -> None:
    out, should_close = (open(sink, "w", encoding="utf-8", newline=""), True) \
        if isinstance(sink, (str, Path)) else (sink, False)
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(SUMMARY_CSV_HEADER.split(","))
        for r in rows:
            writer.writerow(
                (
                    r.name,
                    repr(r.coefficient),
                    repr(r.exp_coef),
                    repr(r.percent_change),
                    repr(r.std_err),
                    repr(r.z),
                    repr(r.p_value),
                    r.crash_total,
                    repr(r.crash_share),
                )
            )
    finally:
        if should_close:
            out.close()


@dataclass(frozen=True)
class Slot:
    weekday: int  # 0 = Monday .. 6 = Sunday
    hour: int
    month: int

    def validate(self) -> None:
        if not 0 <= self.hour <= 23:
            raise DataError(f"hour {self.hour} out of range 0..23")
        if not 0 <= self.weekday <= 6:
            raise DataError(f"weekday {self.weekday} out of range 0..6")
        if not 1 <= self.month <= 12:
            raise DataError(f"month {self.month} out of range 1..12")


@dataclass(frozen=True)
class SlotQuery:
    slots: tuple[Slot, ...]
    precip: float = 0.0


@dataclass(frozen=True)
class RankedSlot:
    weekday: int
    hour: int
    month: int
    expected_count: float
    rank: int
    relative_risk: float

    def to_json_dict(self) -> dict:
        return {
            "weekday": WEEKDAY_LABELS[self.weekday],
            "weekday_index": self.weekday,
            "hour": self.hour,
            "month": self.month,
            "expected_count": self.expected_count,
            "rank": self.rank,
            "relative_risk": self.relative_risk,
        }


def rank_slots(model: Union[FittedGlm, ForestModel], query: SlotQuery) -> list[RankedSlot]:
    """Rank candidate slots ascending by expected crash count.

    Ties break on earlier hour, then earlier weekday index, then month.
    relative_risk is the ratio to the safest slot's expectation. The default
    ranking model is the GLM; a forest works too (its feature schema is
    recovered from the stored column names).
    """
    if not query.slots:
        raise DataError("slot query must contain at least one candidate slot")
    if isinstance(model, FittedGlm):
        schema = model.schema
        predict = lambda x: predict_mean(model, x)
    else:
        from .features import schema_from_column_names
        from .forest import predict_forest

        schema = schema_from_column_names(model.feature_names)
        predict = lambda x: predict_forest(model, x)
    scored: list[tuple[float, Slot]] = []
    for slot in query.slots:
        slot.validate()
        x = schema.encode_parts(slot.hour, slot.weekday, slot.month, float(query.precip))
        scored.append((predict(x), slot))
    scored.sort(key=lambda t: (t[0], t[1].hour, t[1].weekday, t[1].month))
    baseline = max(scored[0][0], 1e-12)
    return [
        RankedSlot(
            weekday=slot.weekday,
            hour=slot.hour,
            month=slot.month,
            expected_count=mu,
            rank=i + 1,
            relative_risk=mu / baseline,
        )
        for i, (mu, slot) in enumerate(scored)
    ]


def all_slots_for_month(month: int) -> tuple[Slot, ...]:
    """The full 7 x 24 slot set for one month."""
    return tuple(Slot(weekday=w, hour=h, month=month) for w in range(7) for h in range(24))


# ---------------------------------------------------------------------------
# persistence


def _canonical_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def _payload_checksum(payload: dict) -> str:
    return hashlib.sha256(_canonical_json(payload).encode()).hexdigest()


def _schema_to_dict(schema: FeatureSchema) -> dict:
    return {
        "coding": schema.coding,
        "include_precip": schema.include_precip,
        "precip_mode": schema.precip_mode,
        "reference": list(schema.reference),
    }


def _schema_from_dict(d: dict) -> FeatureSchema:
    return FeatureSchema(
        coding=d["coding"],
        include_precip=bool(d["include_precip"]),
        precip_mode=d.get("precip_mode", PRECIP_INDICATOR),
        reference=tuple(d["reference"]),
    )


def _glm_payload(model: FittedGlm, summary_rows, dispersion) -> dict:
    payload = {
        "kind": "glm",
        "family": model.family,
        "column_names": list(model.column_names),
        "beta": [repr(float(b)) for b in model.beta],
        "alpha": repr(float(model.alpha)),
        "cov_beta": [[repr(float(v)) for v in row] for row in model.cov_beta],
        "log_likelihood": repr(float(model.log_likelihood)),
        "n_obs": model.n_obs,
        "converged": model.converged,
        "iterations": model.iterations,
        "identifiable": model.identifiable,
        "alpha_pinned": model.alpha_pinned,
        "schema": _schema_to_dict(model.schema),
        "data_fingerprint": model.data_fingerprint,
    }
    if summary_rows is not None:
        payload["summary_rows"] = [asdict(r) for r in summary_rows]
    if dispersion is not None:
        payload["dispersion"] = dict(dispersion)
    return payload


def _forest_payload(model: ForestModel) -> dict:
    return {
        "kind": "forest",
        "params": {
            "n_estimators": model.params.n_estimators,
            "max_depth": model.params.max_depth,
            "min_samples_leaf": model.params.min_samples_leaf,
            "mtry": model.params.mtry,
        },
        "seed": model.seed,
        "feature_names": list(model.feature_names),
        "importance": [repr(float(v)) for v in model.importance],
        "trees": [t.as_dict() for t in model.trees],
    }


def save_model(
    model: Union[FittedGlm, ForestModel],
    sink: Union[str, Path, IO[str]],
    summary_rows: Optional[Sequence[CoefficientRow]] = None,
    dispersion: Optional[dict] = None,
) -> str:
    """Write a versioned, checksummed JSON artifact; returns its checksum."""
    if isinstance(model, FittedGlm):
        payload = _glm_payload(model, summary_rows, dispersion)
    elif isinstance(model, ForestModel):
        payload = _forest_payload(model)
    else:
        raise DataError(f"cannot persist object of type {type(model).__name__}")
    checksum = _payload_checksum(payload)
    doc = {
        "format": ARTIFACT_FORMAT,
        "version": ARTIFACT_VERSION,
        "checksum": checksum,
        "caveat": RISK_CAVEAT,
        "payload": payload,
    }
    text = json.dumps(doc, sort_keys=True, indent=1)
    if isinstance(sink, (str, Path)):
        Path(sink).write_text(text, encoding="utf-8")
    else:
        sink.write(text)
    return checksum


@dataclass
class LoadedArtifact:
    model: Union[FittedGlm, ForestModel]
    kind: str
    checksum: str
    summary_rows: Optional[list[dict]] = None
    dispersion: Optional[dict] = None


def load_model(source: Union[str, Path, IO[str]]) -> LoadedArtifact:
    """Load and verify an artifact; never returns a partially-decoded model."""
    if isinstance(source, (str, Path)):
        try:
            text = Path(source).read_text(encoding="utf-8")
        except OSError as exc:
            raise DataError(f"cannot read artifact: {exc}") from exc
    else:
        text = source.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"artifact corrupt (checksum cannot be verified): {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != ARTIFACT_FORMAT:
        raise DataError("not a crashcount model artifact")
    version = str(doc.get("version", ""))
    major = version.split(".", 1)[0]
    if major != ARTIFACT_VERSION.split(".", 1)[0]:
        raise DataError(f"unsupported artifact version {version!r} (supported major 1)")
    payload = doc.get("payload")
    if not isinstance(payload, dict):
        raise DataError("artifact has no payload")
    if _payload_checksum(payload) != doc.get("checksum"):
        raise DataError("artifact checksum mismatch")

    kind = payload.get("kind")
    if kind == "glm":
        schema = _schema_from_dict(payload["schema"])
        model: Union[FittedGlm, ForestModel] = FittedGlm(
            family=payload["family"],
            schema=schema,
            column_names=tuple(payload["column_names"]),
            beta=np.array([float(v) for v in payload["beta"]]),
            alpha=float(payload["alpha"]),
            cov_beta=np.array(
                [[float(v) for v in row] for row in payload["cov_beta"]]
            ),
            log_likelihood=float(payload["log_likelihood"]),
            n_obs=int(payload["n_obs"]),
            converged=bool(payload["converged"]),
            iterations=int(payload["iterations"]),
            identifiable=bool(payload["identifiable"]),
            alpha_pinned=bool(payload["alpha_pinned"]),
            data_fingerprint=payload.get("data_fingerprint", ""),
        )
    elif kind == "forest":
        params = ForestParams(
            n_estimators=int(payload["params"]["n_estimators"]),
            max_depth=payload["params"]["max_depth"],
            min_samples_leaf=int(payload["params"]["min_samples_leaf"]),
            mtry=payload["params"]["mtry"],
        )
        model = ForestModel(
            trees=[Tree.from_dict(t) for t in payload["trees"]],
            params=params,
            seed=int(payload["seed"]),
            feature_names=tuple(payload["feature_names"]),
            importance=np.array([float(v) for v in payload["importance"]]),
        )
    else:
        raise DataError(f"unknown artifact kind {kind!r}")
    return LoadedArtifact(
        model=model,
        kind=str(kind),
        checksum=str(doc["checksum"]),
        summary_rows=payload.get("summary_rows"),
        dispersion=payload.get("dispersion"),
    )


def predict_model_matrix(model: Union[FittedGlm, ForestModel], x: np.ndarray) -> np.ndarray:
    if isinstance(model, FittedGlm):
        from .glm import predict_mean_matrix

        return predict_mean_matrix(model, x)
    return predict_forest_matrix(model, x)
