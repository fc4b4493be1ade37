"""HTTP facade: status codes, JSON shapes, and error mapping."""
import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from fnvd.data import FeatureSchema
from fnvd.http_api import create_app
from fnvd.lmt import LmtModel, LogisticLeafModel, Node
from fnvd.service import WorkflowService
from fnvd.taxonomy import load_taxonomy

TAX = load_taxonomy(json.dumps({
    "norm": "test norm",
    "root": {"name": "root", "description": "", "children": [
        {"name": f"F{j}", "description": f"feature {j}", "feature": f"F{j}"}
        for j in range(3)
    ]},
}))


def make_client(tmp_path, with_model=True) -> TestClient:
    svc = WorkflowService(tmp_path / "logs", TAX)
    if with_model:
        schema = FeatureSchema(("F0", "F1", "F2"), "class", "violation", "regular")
        model = LmtModel(schema, Node(LogisticLeafModel(-1.0, {0: 4.0, 1: 1.0})), {})
        svc.register_model(model, activate=True)
    return TestClient(create_app(svc))


def action(i: int, x0: float = 1.0) -> dict:
    return {"action_id": f"a{i}", "actor_id": f"actor{i}",
            "features": {"F0": x0, "F1": 0.0, "F2": 0.0},
            "raw_context": f"text {i}"}


class TestActions:
    def test_submit_rejected(self, tmp_path):
        client = make_client(tmp_path)
        resp = client.post("/actions", json=action(1))
        assert resp.status_code == 201
        body = resp.json()
        assert body["record_id"] == "r000001"
        assert body["decision"] == "rejected_violation"
        assert body["report"] is not None
        assert body["report"]["relevant"] == ["F0"]
        assert body["model_version"] == "v1"

    def test_submit_accepted_has_no_report(self, tmp_path):
        client = make_client(tmp_path)
        body = client.post("/actions", json=action(1, x0=0.0)).json()
        assert body["decision"] == "accepted" and body["report"] is None

    def test_duplicate_id_409(self, tmp_path):
        client = make_client(tmp_path)
        assert client.post("/actions", json=action(1)).status_code == 201
        resp = client.post("/actions", json=action(1))
        assert resp.status_code == 409
        assert resp.json()["error"] == "DuplicateActionId"

    def test_schema_mismatch_422(self, tmp_path):
        client = make_client(tmp_path)
        bad = action(1)
        del bad["features"]["F2"]
        resp = client.post("/actions", json=bad)
        assert resp.status_code == 422
        assert resp.json()["error"] == "SchemaMismatch"

    def test_no_active_model_503(self, tmp_path):
        client = make_client(tmp_path, with_model=False)
        resp = client.post("/actions", json=action(1))
        assert resp.status_code == 503
        assert resp.json()["error"] == "NoActiveModel"

    def test_fuzz_totality(self, tmp_path):
        client = make_client(tmp_path)
        rng = np.random.default_rng(42)
        for i in range(100):
            body = action(i, x0=float(rng.uniform()))
            body["features"]["F1"] = float(rng.uniform())
            resp = client.post("/actions", json=body)
            assert resp.status_code == 201
            rec = resp.json()
            assert rec["decision"] in ("rejected_violation", "accepted")
            assert (rec["report"] is not None) == \
                (rec["decision"] == "rejected_violation")
        assert client.get("/metrics").json()["evaluated"] == 100


class TestRecords:
    def test_list_and_get(self, tmp_path):
        client = make_client(tmp_path)
        ids = [client.post("/actions", json=action(i)).json()["record_id"]
               for i in range(3)]
        listing = client.get("/records").json()
        assert listing["total"] == 3
        assert [r["record_id"] for r in listing["records"]] == list(reversed(ids))
        single = client.get(f"/records/{ids[0]}")
        assert single.status_code == 200
        assert single.json()["record_id"] == ids[0]

    def test_filters(self, tmp_path):
        client = make_client(tmp_path)
        for i in range(4):
            client.post("/actions", json=action(i, x0=float(i % 2)))
        rejected = client.get("/records", params={"decision": "rejected_violation"})
        assert rejected.json()["total"] == 2
        assert all(r["decision"] == "rejected_violation"
                   for r in rejected.json()["records"])
        assert client.get("/records", params={"flagged": "false"}).json()["total"] == 4

    def test_pagination_disjoint(self, tmp_path):
        client = make_client(tmp_path)
        for i in range(5):
            client.post("/actions", json=action(i))
        p0 = client.get("/records", params={"page": 0, "page_size": 3}).json()
        p1 = client.get("/records", params={"page": 1, "page_size": 3}).json()
        ids0 = {r["record_id"] for r in p0["records"]}
        ids1 = {r["record_id"] for r in p1["records"]}
        assert not ids0 & ids1 and len(ids0 | ids1) == 5

    def test_bad_filter_400(self, tmp_path):
        client = make_client(tmp_path)
        assert client.get("/records", params={"decision": "bogus"}).status_code == 400
        assert client.get("/records", params={"flagged": "banana"}).status_code == 400
        assert client.get("/records", params={"since": "garbage"}).status_code == 400

    def test_unknown_record_404(self, tmp_path):
        client = make_client(tmp_path)
        resp = client.get("/records/r000404")
        assert resp.status_code == 404
        assert resp.json()["error"] == "UnknownRecord"


class TestFeedback:
    def test_flag_then_refetch(self, tmp_path):
        client = make_client(tmp_path)
        rid = client.post("/actions", json=action(1, x0=0.0)).json()["record_id"]
        resp = client.post(f"/records/{rid}/feedback",
                           json={"member_id": "m1", "verdict": "flag_as_violation",
                                 "comment": "looks bad"})
        assert resp.status_code == 200
        assert len(resp.json()["feedback"]) == 1
        again = client.get(f"/records/{rid}").json()
        assert again["feedback"][0]["member_id"] == "m1"

    def test_duplicate_flag_409(self, tmp_path):
        client = make_client(tmp_path)
        rid = client.post("/actions", json=action(1)).json()["record_id"]
        body = {"member_id": "m1", "verdict": "flag_as_non_violation"}
        assert client.post(f"/records/{rid}/feedback", json=body).status_code == 200
        resp = client.post(f"/records/{rid}/feedback", json=body)
        assert resp.status_code == 409
        assert resp.json()["error"] == "DuplicateFlag"

    def test_unknown_record_404(self, tmp_path):
        client = make_client(tmp_path)
        resp = client.post("/records/r000404/feedback",
                           json={"member_id": "m1", "verdict": "flag_as_violation"})
        assert resp.status_code == 404

    def test_bad_verdict_422(self, tmp_path):
        client = make_client(tmp_path)
        rid = client.post("/actions", json=action(1)).json()["record_id"]
        resp = client.post(f"/records/{rid}/feedback",
                           json={"member_id": "m1", "verdict": "maybe"})
        assert resp.status_code == 422


class TestAdminAndMetrics:
    def test_metrics_shape(self, tmp_path):
        client = make_client(tmp_path)
        m = client.get("/metrics").json()
        assert m == {"evaluated": 0, "rejected": 0, "accepted": 0, "flagged": 0,
                     "model_version": "v1", "threshold": 0.5, "confusion": None}

    def test_retrain_then_activate(self, tmp_path):
        client = make_client(tmp_path)
        for i in range(8):
            client.post("/actions", json=action(i, x0=float(i % 2)))
        resp = client.post("/admin/retrain",
                           json={"seed": 5, "max_boost_iters": 20})
        assert resp.status_code == 201
        assert resp.json() == {"version": "v2", "active": "v1"}
        assert client.get("/metrics").json()["model_version"] == "v1"
        resp = client.post("/admin/activate/v2")
        assert resp.status_code == 200 and resp.json() == {"active": "v2"}
        assert client.get("/metrics").json()["model_version"] == "v2"

    def test_retrain_degenerate_409(self, tmp_path):
        client = make_client(tmp_path)
        for i in range(3):
            client.post("/actions", json=action(i, x0=1.0))
        resp = client.post("/admin/retrain", json={"seed": 1})
        assert resp.status_code == 409
        assert resp.json()["error"] == "DegenerateExport"

    def test_retrain_bad_params_422(self, tmp_path):
        client = make_client(tmp_path)
        for i in range(4):
            client.post("/actions", json=action(i, x0=float(i % 2)))
        resp = client.post("/admin/retrain", json={"seed": 1, "max_boost_iters": 0})
        assert resp.status_code == 422

    def test_activate_unknown_404(self, tmp_path):
        client = make_client(tmp_path)
        resp = client.post("/admin/activate/v99")
        assert resp.status_code == 404
        assert resp.json()["error"] == "UnknownVersion"
