"""Read-only JSON API over a fitted artifact, plus static UI assets.

Endpoints (versioned prefix, application/json, UTF-8):

    GET  /api/v1/model
    POST /api/v1/rank      {"slots": [{"weekday": "MO"|0, "hour": 8, "month": 6}], "precip": 0}
    GET  /api/v1/heatmap?month=M&precip=P

Every response carries the artifact fingerprint in X-Model-Fingerprint so
clients can detect reloads. The server holds one immutable model loaded at
startup; handlers never mutate state, so threading needs no locks.
"""

from __future__ import annotations

import json
import mimetypes
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional, Union
from urllib.parse import parse_qs, urlparse

from . import advisor
from .errors import DataError
from .glm import FittedGlm, predict_mean
from .ingest import WEEKDAY_LABELS

API_PREFIX = "/api/v1"
FINGERPRINT_HEADER = "X-Model-Fingerprint"


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, detail: Optional[dict] = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.detail = detail

    def body(self) -> dict:
        doc = {"code": self.code, "message": self.message}
        if self.detail is not None:
            doc["detail"] = self.detail
        return doc


class ServiceState:
    """Immutable request-serving state built once at startup."""

    def __init__(
        self,
        artifact: Optional[advisor.LoadedArtifact],
        static_dir: Optional[Path] = None,
    ):
        self.artifact = artifact
        self.static_dir = static_dir.resolve() if static_dir else None
        if artifact is None:
            self.model = None
            self.fingerprint = "no-model"
            self.model_document: dict = {}
            return
        if artifact.kind != "glm":
            raise DataError("service requires a GLM artifact")
        self.model: Optional[FittedGlm] = artifact.model  # type: ignore[assignment]
        self.fingerprint = artifact.checksum
        self.model_document = self._build_model_document()

    def _require_model(self) -> FittedGlm:
        if self.model is None:
            raise ApiError(404, "not_found", "no model artifact loaded")
        return self.model

    def _build_model_document(self) -> dict:
        model = self.model
        assert model is not None and self.artifact is not None
        rows = self.artifact.summary_rows
        if rows is not None:
            # one row per model coefficient: reference-level filler rows
            # (coefficient pinned to 0) are a summary-table concern
            rows = [r for r in rows if not r.get("reference")]
        if rows is None:
            from .glm import percent_change, wald_inference
            import math

            rows = []
            for name, coef, w in zip(model.column_names, model.beta, wald_inference(model)):
                rows.append(
                    {
                        "name": name,
                        "category": "",
                        "coefficient": float(coef),
                        "exp_coef": math.exp(float(coef)),
                        "percent_change": percent_change(float(coef)),
                        "std_err": w.std_err,
                        "z": w.z,
                        "p_value": w.p_value,
                        "crash_total": 0,
                        "crash_share": 0.0,
                        "reference": False,
                        "degenerate": w.degenerate,
                    }
                )
        rows = [dict(r, coefficient_str=repr(float(r["coefficient"]))) for r in rows]
        return {
            "family": model.family,
            "alpha": model.alpha,
            "alpha_str": repr(float(model.alpha)),
            "rows": rows,
            "dispersion": self.artifact.dispersion,
            "fit_meta": {
                "n_obs": model.n_obs,
                "converged": model.converged,
                "iterations": model.iterations,
                "identifiable": model.identifiable,
                "alpha_pinned": model.alpha_pinned,
                "log_likelihood": model.log_likelihood,
                "log_likelihood_str": repr(float(model.log_likelihood)),
                "data_fingerprint": model.data_fingerprint,
                "caveat": advisor.RISK_CAVEAT,
            },
            "fingerprint": self.fingerprint,
        }

    # ------------------------------------------------------------------
    def handle_model(self) -> dict:
        self._require_model()
        return self.model_document

    def handle_rank(self, body: dict) -> list[dict]:
        model = self._require_model()
        slots_raw = body.get("slots")
        if not isinstance(slots_raw, list) or not slots_raw:
            raise ApiError(400, "bad_request", "slots must be a non-empty array",
                           {"field": "slots"})
        precip = body.get("precip", 0)
        if not isinstance(precip, (int, float)) or isinstance(precip, bool) or precip < 0:
            raise ApiError(400, "bad_request", "precip must be a non-negative number",
                           {"field": "precip"})
        slots = []
        for i, raw in enumerate(slots_raw):
            if not isinstance(raw, dict):
                raise ApiError(400, "bad_request", f"slot {i} must be an object",
                               {"field": "slots", "index": i})
            slots.append(self._parse_slot(raw, i))
        ranked = advisor.rank_slots(model, advisor.SlotQuery(tuple(slots), float(precip)))
        return [r.to_json_dict() for r in ranked]

    @staticmethod
    def _parse_slot(raw: dict, index: int) -> advisor.Slot:
        def fail(field: str, message: str):
            raise ApiError(400, "bad_request", message,
                           {"field": field, "index": index})

        weekday = raw.get("weekday")
        if isinstance(weekday, str):
            label = weekday.upper()
            if label not in WEEKDAY_LABELS:
                fail("weekday", f"unknown weekday {weekday!r}")
            weekday = WEEKDAY_LABELS.index(label)
        if not isinstance(weekday, int) or isinstance(weekday, bool) or not 0 <= weekday <= 6:
            fail("weekday", "weekday must be MO..SU or an index 0..6")
        hour = raw.get("hour")
        if not isinstance(hour, int) or isinstance(hour, bool) or not 0 <= hour <= 23:
            fail("hour", "hour must be an integer 0..23")
        month = raw.get("month")
        if not isinstance(month, int) or isinstance(month, bool) or not 1 <= month <= 12:
            fail("month", "month must be an integer 1..12")
        return advisor.Slot(weekday=weekday, hour=hour, month=month)

    def handle_heatmap(self, query: dict[str, list[str]]) -> dict:
        model = self._require_model()

        def param(name: str) -> str:
            values = query.get(name)
            if not values:
                raise ApiError(400, "bad_request", f"missing query parameter {name}",
                               {"field": name})
            return values[0]

        try:
            month = int(param("month"))
        except ValueError:
            raise ApiError(400, "bad_request", "month must be an integer",
                           {"field": "month"})
        if not 1 <= month <= 12:
            raise ApiError(400, "bad_request", "month must be within 1..12",
                           {"field": "month"})
        try:
            precip = float(param("precip"))
        except ValueError:
            raise ApiError(400, "bad_request", "precip must be a number",
                           {"field": "precip"})
        if precip < 0:
            raise ApiError(400, "bad_request", "precip must be non-negative",
                           {"field": "precip"})
        schema = model.schema
        cells = []
        lo = hi = None
        for weekday in range(7):
            row = []
            for hour in range(24):
                x = schema.encode_parts(hour, weekday, month, precip)
                mu = predict_mean(model, x)
                row.append(mu)
                lo = mu if lo is None or mu < lo else lo
                hi = mu if hi is None or mu > hi else hi
            cells.append(row)
        return {
            "month": month,
            "precip": precip,
            "weekday_labels": list(WEEKDAY_LABELS),
            "hours": list(range(24)),
            "cells": cells,
            "min": lo,
            "max": hi,
            "fingerprint": self.fingerprint,
        }


def _encode(document: Union[dict, list]) -> bytes:
    return json.dumps(document, sort_keys=True, separators=(",", ":")).encode("utf-8")


class _Handler(BaseHTTPRequestHandler):
    state: ServiceState  # injected by create_server
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt: str, *args) -> None:  # quiet by default
        pass

    def _send_json(self, status: int, document: Union[dict, list]) -> None:
        body = _encode(document)
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.send_header(FINGERPRINT_HEADER, self.state.fingerprint)
        self.end_headers()
        self.wfile.write(body)

    def _send_error_doc(self, err: ApiError) -> None:
        self._send_json(err.status, err.body())

    def do_GET(self) -> None:
        try:
            parsed = urlparse(self.path)
            path = parsed.path
            if path == f"{API_PREFIX}/model":
                self._send_json(200, self.state.handle_model())
            elif path == f"{API_PREFIX}/heatmap":
                self._send_json(200, self.state.handle_heatmap(parse_qs(parsed.query)))
            elif path.startswith(API_PREFIX):
                self._send_error_doc(ApiError(404, "not_found", f"no such endpoint {path}"))
            else:
                self._serve_static(path)
        except ApiError as err:
            self._send_error_doc(err)
        except Exception as exc:  # pragma: no cover - last-resort guard
            self._send_error_doc(ApiError(500, "model_error", str(exc)))

    def do_POST(self) -> None:
        try:
            parsed = urlparse(self.path)
            if parsed.path != f"{API_PREFIX}/rank":
                self._send_error_doc(ApiError(404, "not_found", f"no such endpoint {parsed.path}"))
                return
            length = int(self.headers.get("Content-Length") or 0)
            raw = self.rfile.read(length) if length else b""
            try:
                body = json.loads(raw.decode("utf-8")) if raw else {}
            except (json.JSONDecodeError, UnicodeDecodeError):
                raise ApiError(400, "bad_request", "request body is not valid JSON")
            if not isinstance(body, dict):
                raise ApiError(400, "bad_request", "request body must be a JSON object")
            self._send_json(200, self.state.handle_rank(body))
        except ApiError as err:
            self._send_error_doc(err)
        except Exception as exc:  # pragma: no cover
            self._send_error_doc(ApiError(500, "model_error", str(exc)))

    def _serve_static(self, path: str) -> None:
        static_dir = self.state.static_dir
        if static_dir is None:
            self._send_error_doc(ApiError(404, "not_found", "no static assets configured"))
            return
        rel = path.lstrip("/") or "index.html"
        target = (static_dir / rel).resolve()
        if not str(target).startswith(str(static_dir)) or not target.is_file():
            self._send_error_doc(ApiError(404, "not_found", f"no such file {path}"))
            return
        body = target.read_bytes()
        ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.send_header(FINGERPRINT_HEADER, self.state.fingerprint)
        self.end_headers()
        self.wfile.write(body)


def create_server(
    artifact_path: Optional[Union[str, Path]],
    host: str = "127.0.0.1",
    port: int = 0,
    static_dir: Optional[Path] = None,
) -> ThreadingHTTPServer:
    """Load the artifact once and return a ready-to-serve HTTP server."""
    artifact = advisor.load_model(artifact_path) if artifact_path is not None else None
    state = ServiceState(artifact, static_dir=static_dir)
    handler = type("BoundHandler", (_Handler,), {"state": state})
    return ThreadingHTTPServer((host, port), handler)
