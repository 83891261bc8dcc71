import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from gxestat.fixtures import fixture_path
from gxestat.service import create_app

WATERMELON_BYTES = fixture_path("watermelon.csv").read_bytes()
OATS_BYTES = fixture_path("oats.csv").read_bytes()


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


@pytest.fixture(scope="module")
def melon_session(client):
    r = client.post("/datasets?year_col=YR&rep_col=RP", content=WATERMELON_BYTES)
    assert r.status_code == 200
    return r.json()


def test_healthz(client):
    assert client.get("/healthz").status_code == 200


def test_upload_summary(melon_session):
    summary = melon_session["summary"]
    assert summary["n_genotypes"] == 10
    assert summary["n_environments"] == 10
    assert summary["balanced"]


def test_upload_bad_csv_reports_row(client):
    r = client.post("/datasets?year_col=YR&rep_col=RP", content=b"YR,LC,RP,CLT,MY\n2009,KN,1,A,xx\n")
    assert r.status_code == 400
    body = r.json()
    assert body["error"] == "NonNumericTraitError"
    assert "row" in body["detail"]


def test_unknown_session_404(client):
    assert client.post("/sessions/nope/significance", json={"case": 1}).status_code == 404
    assert client.post("/sessions/nope/stability").status_code == 404
    assert client.get("/sessions/nope/bundle").status_code == 404


def test_invalid_case_422(client, melon_session):
    sid = melon_session["session_id"]
    r = client.post(f"/sessions/{sid}/significance", json={"case": 9})
    assert r.status_code == 422


def test_stability_idempotent(client, melon_session):
    sid = melon_session["session_id"]
    r1 = client.post(f"/sessions/{sid}/stability")
    r2 = client.post(f"/sessions/{sid}/stability")
    assert r1.status_code == 200
    assert r1.content == r2.content
    rows = r1.json()["rows"]
    assert len(rows) == 10


def test_gge_which_won_where_winners(client, melon_session):
    sid = melon_session["session_id"]
    r = client.post(f"/sessions/{sid}/gge", json={"mode": "which_won_where"})
    assert r.status_code == 200
    winners = r.json()["overlays"]["winner_by_environment"]
    for env in ("FL", "TX", "CL", "KN"):
        assert winners[env] == "StarbriteF1"


def test_gge_unknown_mode(client, melon_session):
    sid = melon_session["session_id"]
    assert client.post(f"/sessions/{sid}/gge", json={"mode": "pie_chart"}).status_code == 422


def test_ammi_idempotent_with_seed(client, melon_session):
    sid = melon_session["session_id"]
    body = {"n_boot": 200, "seed": 5}
    r1 = client.post(f"/sessions/{sid}/ammi", json=body)
    r2 = client.post(f"/sessions/{sid}/ammi", json=body)
    assert r1.status_code == 200
    assert r1.content == r2.content
    assert "retained" in r1.json()["selection"]
    assert len(r1.json()["singular_values"]) >= 2


def test_significance_oats_case2(client):
    r = client.post("/datasets?rep_col=RP", content=OATS_BYTES)
    sid = r.json()["session_id"]
    sig = client.post(f"/sessions/{sid}/significance", json={"case": 2})
    assert sig.status_code == 200
    rows = {row["term"]: row for row in sig.json()["rows"]}
    assert rows["CLT"]["mean_square"] == pytest.approx(0.554, abs=0.001)
    # repeated call returns the identical payload
    sig2 = client.post(f"/sessions/{sid}/significance", json={"case": 2})
    assert sig.content == sig2.content


def test_bundle_endpoint_small_dataset(client):
    rows = ["YR,LC,RP,CLT,MY"]
    rng = np.random.default_rng(1)
    for y in ("a", "b"):
        for l in ("n", "s", "w"):
            for r in ("1", "2"):
                for g in ("g1", "g2", "g3"):
                    rows.append(f"{y},{l},{r},{g},{rng.normal(20, 2):.4f}")
    resp = client.post("/datasets?year_col=YR&rep_col=RP", content="\n".join(rows).encode())
    sid = resp.json()["session_id"]
    b1 = client.get(f"/sessions/{sid}/bundle")
    assert b1.status_code == 200
    doc = b1.json()
    assert doc["version"] == "gxestat-bundle/1"
    assert set(doc["gge"]["modes"]) == {
        "pc_scatter", "mean_vs_stability", "ranking_genotypes", "ranking_environments",
        "which_won_where", "discrim_vs_repr", "env_relationship",
    }
    b2 = client.get(f"/sessions/{sid}/bundle")
    assert b1.content == b2.content
