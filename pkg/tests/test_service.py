import json
import math
import threading
import urllib.error
import urllib.request

import numpy as np
import pytest

from crashcount.advisor import save_model, summarize
from crashcount.features import FeatureSchema, build_design
from crashcount.glm import dispersion_check, fit_negbin, fit_poisson
from crashcount.service import FINGERPRINT_HEADER, create_server


@pytest.fixture(scope="module")
def artifact_path(tmp_path_factory, year_grid):
    grid, _ = year_grid
    design = build_design(grid, FeatureSchema())
    poisson = fit_poisson(design)
    report = dispersion_check(poisson, design)
    model = fit_negbin(design)
    rows = summarize(model, grid)
    path = tmp_path_factory.mktemp("artifact") / "model.json"
    from dataclasses import asdict

    save_model(model, path, summary_rows=rows, dispersion=asdict(report))
    return path


@pytest.fixture(scope="module")
def server(artifact_path, tmp_path_factory):
    static = tmp_path_factory.mktemp("static")
    (static / "index.html").write_text("<!doctype html><title>explorer</title>")
    srv = create_server(artifact_path, host="127.0.0.1", port=0, static_dir=static)
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{srv.server_address[1]}"
    srv.shutdown()
    srv.server_close()


def get(base, path):
    req = urllib.request.Request(base + path)
    with urllib.request.urlopen(req) as resp:
        return resp.status, dict(resp.headers), resp.read()


def post(base, path, body: dict):
    data = json.dumps(body).encode()
    req = urllib.request.Request(
        base + path, data=data, headers={"Content-Type": "application/json"}
    )
    try:
        with urllib.request.urlopen(req) as resp:
            return resp.status, dict(resp.headers), resp.read()
    except urllib.error.HTTPError as err:
        return err.code, dict(err.headers), err.read()


class TestModelEndpoint:
    def test_document_shape(self, server):
        status, headers, body = get(server, "/api/v1/model")
        assert status == 200
        doc = json.loads(body)
        assert doc["family"] == "negbin2"
        # reference-cell coding: one row per model coefficient
        assert len(doc["rows"]) == 42
        assert doc["dispersion"]["overdispersed"] is True
        assert headers[FINGERPRINT_HEADER] == doc["fingerprint"]

    def test_rows_percent_change_consistent(self, server):
        doc = json.loads(get(server, "/api/v1/model")[2])
        for row in doc["rows"]:
            expected = 100.0 * (math.exp(row["coefficient"]) - 1.0)
            assert abs(row["percent_change"] - expected) <= 1e-6
            assert float(row["coefficient_str"]) == row["coefficient"]

    def test_unknown_endpoint_is_api_error(self, server):
        with pytest.raises(urllib.error.HTTPError) as err:
            get(server, "/api/v1/nothing")
        assert err.value.code == 404
        assert json.loads(err.value.read())["code"] == "not_found"


class TestRankEndpoint:
    def test_singleton(self, server):
        status, _, body = post(
            server, "/api/v1/rank", {"slots": [{"weekday": "MO", "hour": 8, "month": 6}], "precip": 0}
        )
        assert status == 200
        ranked = json.loads(body)
        assert len(ranked) == 1
        assert ranked[0]["rank"] == 1
        assert ranked[0]["relative_risk"] == 1.0

    def test_bad_hour_names_field(self, server):
        status, _, body = post(
            server, "/api/v1/rank", {"slots": [{"weekday": 0, "hour": 24, "month": 6}]}
        )
        assert status == 400
        doc = json.loads(body)
        assert doc["code"] == "bad_request"
        assert doc["detail"]["field"] == "hour"

    def test_empty_slots_rejected(self, server):
        status, _, body = post(server, "/api/v1/rank", {"slots": []})
        assert status == 400
        assert json.loads(body)["detail"]["field"] == "slots"

    def test_identical_bodies_identical_bytes(self, server):
        body = {
            "slots": [
                {"weekday": "FR", "hour": 2, "month": 3},
                {"weekday": "MO", "hour": 8, "month": 3},
                {"weekday": "WE", "hour": 14, "month": 3},
            ],
            "precip": 1,
        }
        first = post(server, "/api/v1/rank", body)[2]
        second = post(server, "/api/v1/rank", body)[2]
        assert first == second

    def test_matches_library_ranking(self, server, artifact_path):
        from crashcount.advisor import Slot, SlotQuery, load_model, rank_slots

        slots = [{"weekday": w, "hour": h, "month": 6} for w in (0, 4) for h in (2, 8, 17)]
        api = json.loads(post(server, "/api/v1/rank", {"slots": slots, "precip": 0})[2])
        model = load_model(artifact_path).model
        lib = rank_slots(
            model,
            SlotQuery(tuple(Slot(s["weekday"], s["hour"], s["month"]) for s in slots), 0.0),
        )
        assert [(r["weekday_index"], r["hour"]) for r in api] == [
            (r.weekday, r.hour) for r in lib
        ]
        assert [r["expected_count"] for r in api] == [r.expected_count for r in lib]


class TestHeatmapEndpoint:
    def test_full_grid_positive(self, server):
        doc = json.loads(get(server, "/api/v1/heatmap?month=6&precip=0")[2])
        cells = doc["cells"]
        assert len(cells) == 7 and all(len(row) == 24 for row in cells)
        flat = [v for row in cells for v in row]
        assert all(v > 0 for v in flat)
        assert doc["min"] == min(flat)
        assert doc["max"] == max(flat)

    def test_precip_scales_every_cell_by_common_factor(self, server, artifact_path):
        from crashcount.advisor import load_model

        model = load_model(artifact_path).model
        coef = dict(zip(model.column_names, model.beta))["Precipitation"]
        dry = json.loads(get(server, "/api/v1/heatmap?month=6&precip=0")[2])["cells"]
        wet = json.loads(get(server, "/api/v1/heatmap?month=6&precip=1")[2])["cells"]
        factor = math.exp(coef)
        for row_dry, row_wet in zip(dry, wet):
            for a, b in zip(row_dry, row_wet):
                assert b == pytest.approx(a * factor, rel=1e-12)

    def test_cell_ratios_follow_coefficients(self, server, artifact_path):
        from crashcount.advisor import load_model

        model = load_model(artifact_path).model
        coef = dict(zip(model.column_names, model.beta))
        cells = json.loads(get(server, "/api/v1/heatmap?month=6&precip=0")[2])["cells"]
        # FR hour 2 over MO hour 8: exp of coefficient differences
        expected = math.exp(coef["FR"] + coef["Hour_2"] - coef["Hour_8"])
        assert cells[4][2] / cells[0][8] == pytest.approx(expected, rel=1e-9)

    def test_month_out_of_range(self, server):
        with pytest.raises(urllib.error.HTTPError) as err:
            get(server, "/api/v1/heatmap?month=13&precip=0")
        assert err.value.code == 400
        assert json.loads(err.value.read())["detail"]["field"] == "month"

    def test_missing_param(self, server):
        with pytest.raises(urllib.error.HTTPError) as err:
            get(server, "/api/v1/heatmap?month=6")
        assert err.value.code == 400


class TestStaticAssets:
    def test_index_served_at_root(self, server):
        status, headers, body = get(server, "/")
        assert status == 200
        assert b"explorer" in body
        assert FINGERPRINT_HEADER in headers

    def test_traversal_blocked(self, server):
        with pytest.raises(urllib.error.HTTPError) as err:
            get(server, "/../../etc/passwd")
        assert err.value.code == 404


class TestNoArtifact:
    def test_404_when_no_artifact_loaded(self, tmp_path):
        srv = create_server(None, host="127.0.0.1", port=0)
        thread = threading.Thread(target=srv.serve_forever, daemon=True)
        thread.start()
        base = f"http://127.0.0.1:{srv.server_address[1]}"
        try:
            with pytest.raises(urllib.error.HTTPError) as err:
                get(base, "/api/v1/model")
            assert err.value.code == 404
            assert json.loads(err.value.read())["code"] == "not_found"
        finally:
            srv.shutdown()
            srv.server_close()
