from __future__ import annotations

import pytest
from fastapi.testclient import TestClient

from online_sampler.main import app


@pytest.fixture
def client():
    with TestClient(app) as c:
        yield c


def test_health(client):
    assert client.get("/health").json() == {"status": "ok"}


def test_extend_from_default_seed(client):
    resp = client.post("/extend", json={"points": [1 / 3, 0.5], "count": 5})
    assert resp.status_code == 200
    body = resp.json()
    assert len(body["points"]) == 7
    assert [row["n"] for row in body["trace"]] == [3, 4, 5, 6, 7]


def test_extend_from_empty_set(client):
    body = client.post("/extend", json={"count": 1}).json()
    assert body["points"] == [1.0]
    assert body["trace"][0]["energy"] == 0.0


def test_extend_rejects_points_outside_unit_interval(client):
    resp = client.post("/extend", json={"points": [1.5], "count": 1})
    assert resp.status_code == 422
    assert "1.5" in resp.json()["detail"]


def test_request_size_limit(client, monkeypatch):
    monkeypatch.setenv("ONLINE_SAMPLER_MAX_API_POINTS", "10")
    resp = client.post("/extend", json={"points": [0.5], "count": 20})
    assert resp.status_code == 413


def test_metrics(client):
    body = client.post("/metrics", json={"points": [0.0, 0.5]}).json()
    assert body["n"] == 2
    assert body["periodic_l2"] == pytest.approx(1 / 24)
    assert body["star"] == pytest.approx(0.5)


def test_metrics_rejects_empty(client):
    assert client.post("/metrics", json={"points": []}).status_code == 422


def test_retarget(client):
    payload = {
        "points": [i / 100 for i in range(1, 101)],
        "distribution": {"type": "gaussian", "mean": 0, "std": 1},
        "add_count": 20,
    }
    body = client.post("/retarget", json=payload).json()
    assert len(body["points"]) == 120
    assert len(body["new_points"]) == 20
    assert body["points_needed_estimate"] >= 100


def test_retarget_rejects_bad_distribution(client):
    payload = {"points": [0.5], "distribution": {"type": "gaussian", "std": -1}, "add_count": 2}
    assert client.post("/retarget", json=payload).status_code == 422


def test_predict(client):
    body = client.post("/predict", json={"points": [0.1, 0.4, 0.45, 0.9]}).json()
    assert 0.0 <= body["predicted"] <= 1.0
    assert body["gap"] == pytest.approx(abs(body["predicted"] - body["greedy"]))


def test_meanfield(client):
    body = client.post("/meanfield", json={"distribution": {"type": "power", "theta": 2}}).json()
    assert body["energy"] == pytest.approx(1 / 6, abs=1e-8)
    assert body["min_derivative"] == pytest.approx(-0.5, abs=1e-6)
    assert body["fixed_points"] == [0.0, 1.0]
    assert all(body["checks"].values())


def test_meanfield_rejects_real_line_support(client):
    resp = client.post("/meanfield", json={"distribution": {"type": "gaussian"}})
    assert resp.status_code == 422


def test_generate(client):
    body = client.post("/generate", json={"kind": "vdc", "count": 3}).json()
    assert body == {"kind": "vdc", "values": [0.5, 0.25, 0.75]}
    seeded = client.post("/generate", json={"kind": "energy", "count": 3, "seed_points": "default_seed"}).json()
    assert seeded["values"][:2] == [1 / 3, 0.5]


def test_generate_rejects_seeds_for_index_sequences(client):
    resp = client.post("/generate", json={"kind": "kronecker", "count": 3, "seed_points": [0.5]})
    assert resp.status_code == 422
