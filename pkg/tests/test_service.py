import base64

import numpy as np
import pytest
from fastapi.testclient import TestClient

from snnaccel.codec import EventStream, decode_events
from snnaccel.service.app import app

SCNN5 = "32x32x3 64c3-p2-128c3-p2-256c3-p2-256c3-p2-512c3-p2-fc"


@pytest.fixture
def client():
    with TestClient(app) as c:
        yield c


class TestHealthAndValidate:
    def test_health(self, client):
        resp = client.get("/health")
        assert resp.status_code == 200
        assert resp.json()["status"] == "ok"

    def test_validate_model_string(self, client):
        resp = client.post("/config/validate", json={"config": SCNN5})
        assert resp.status_code == 200
        body = resp.json()
        assert body["input_channels"] == 3
        assert body["shapes"][-1]["channels"] == 10

    def test_validate_rejects_bad_chain(self, client):
        resp = client.post("/config/validate",
                           json={"config": "7x7x4 p2-fc", "encode_first_conv": False})
        assert resp.status_code == 400
        assert "error" in resp.json()


class TestCostEndpoints:
    def test_cost_scnn5_t2(self, client):
        resp = client.post("/cost", json={"config": SCNN5, "timesteps": 2})
        assert resp.status_code == 200
        body = resp.json()
        assert body["timesteps"] == 2
        assert body["total_vmem_bytes"] == 124416.0
        assert len(body["layers"]) == 4

    def test_cost_t1_no_vmem(self, client):
        resp = client.post("/cost", json={"config": SCNN5, "timesteps": 1})
        body = resp.json()
        assert body["total_vmem_bytes"] == 0
        assert all(row["psum_accesses"] == 0 for row in body["layers"])

    def test_compare_dataflow(self, client):
        resp = client.post("/compare-dataflow", json={"config": SCNN5})
        assert resp.status_code == 200
        rows = resp.json()["layers"]
        assert len(rows) == 4
        for row in rows:
            assert row["os_weight_reads"] > row["ws_weight_reads"]
            assert row["os_psum_accesses"] == 0
            assert row["ws_psum_accesses"] > 0

    def test_search_parallel_recovers_paper_factors(self, client):
        resp = client.post("/search-parallel",
                           json={"config": SCNN5, "pe_budget": 99})
        body = resp.json()
        assert body["factors"] == [4, 4, 2, 1]
        assert body["pe_used"] == 99
        assert body["speedup"] == 4.0


class TestPipelineEndpoint:
    def test_explicit_stages_match_model(self, client):
        resp = client.post("/pipeline", json={
            "stages": [{"label": "a", "service_cycles": 10},
                       {"label": "b", "service_cycles": 5},
                       {"label": "c", "service_cycles": 7}],
            "frames": 4})
        body = resp.json()
        assert body["makespan"] == 52
        assert body["model_makespan"] == 52
        assert not body["capacity_limited"]
        assert len(body["trace"]) == 12

    def test_config_driven_pipeline(self, client):
        resp = client.post("/pipeline", json={
            "config": SCNN5, "frames": 8, "include_trace": False})
        body = resp.json()
        assert body["trace"] is None
        assert body["makespan"] >= body["model_makespan"] * 0 + 1

    def test_requires_stages_or_config(self, client):
        resp = client.post("/pipeline", json={"frames": 2})
        assert resp.status_code == 400

    def test_per_pixel_mode_with_fifo_sizing(self, client):
        resp = client.post("/pipeline", json={
            "config": "8x8x1 4c3-8c3-p2-8c3-p2-fc10", "frames": 4,
            "per_pixel": True, "size_buffers": True, "include_trace": False})
        assert resp.status_code == 200
        body = resp.json()
        assert body["granularity"] == "pixel"
        assert len(body["sized_capacities"]) == 2
        assert all(c >= 1 for c in body["sized_capacities"])


class TestInferEndpoint:
    def test_infer_end_to_end(self, client, tiny_setup):
        resp = client.post("/infer", json={
            "config": open(tiny_setup["config_path"]).read(),
            "weights_path": tiny_setup["weights_path"],
            "images_path": tiny_setup["images_path"],
            "labels_path": tiny_setup["labels_path"],
        })
        assert resp.status_code == 200
        body = resp.json()
        assert body["images"] == 12
        assert len(body["predictions"]) == 12
        assert body["accuracy"] is not None
        assert body["per_layer_sfr"][0]["layer"] == "encoder"

    def test_infer_is_deterministic(self, client, tiny_setup):
        payload = {
            "config": open(tiny_setup["config_path"]).read(),
            "weights_path": tiny_setup["weights_path"],
            "images_path": tiny_setup["images_path"],
            "limit": 5,
        }
        a = client.post("/infer", json=payload)
        b = client.post("/infer", json=payload)
        assert a.content == b.content

    def test_missing_weights_404(self, client, tiny_setup):
        resp = client.post("/infer", json={
            "config": open(tiny_setup["config_path"]).read(),
            "weights_path": str(tiny_setup["tmp_path"] / "nope.stiw"),
            "images_path": tiny_setup["images_path"],
        })
        assert resp.status_code == 404
        assert resp.json()["error"]["code"] == "not_found"


class TestEncodeEndpoint:
    def test_encode_roundtrips(self, client, tiny_setup):
        resp = client.post("/encode", json={
            "config": open(tiny_setup["config_path"]).read(),
            "weights_path": tiny_setup["weights_path"],
            "images_path": tiny_setup["images_path"],
            "image_index": 3,
        })
        assert resp.status_code == 200
        body = resp.json()
        stream = EventStream.from_bytes(base64.b64decode(body["stream_base64"]))
        assert stream.count == body["events"]
        frame = decode_events(stream)
        assert frame.data.shape == (8, 8, 4)
        assert body["payload_bits"] == body["events"] * body["event_width_bits"]

    def test_encode_index_out_of_range(self, client, tiny_setup):
        resp = client.post("/encode", json={
            "config": open(tiny_setup["config_path"]).read(),
            "weights_path": tiny_setup["weights_path"],
            "images_path": tiny_setup["images_path"],
            "image_index": 99,
        })
        assert resp.status_code == 400
