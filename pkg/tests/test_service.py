import json

import pytest
from fastapi.testclient import TestClient

from vizflow.cli import main
from vizflow.gallery import synth_cities
from vizflow.service import create_app

PLOT = "Visualization { FillEllipse { X=$Longitude; Y=$Latitude; Width=.04; Height=.04; } }"


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app(), raise_server_exceptions=False)


def test_render_with_inline_csv(client):
    csv = synth_cities(30, seed=2).to_csv()
    r = client.post("/render", json={
        "program": PLOT, "data": csv, "outputs": ["svg", "text", "stats"]})
    assert r.status_code == 200
    body = r.json()
    assert body["svg"].startswith("<svg")
    assert body["svg"].count("<ellipse") == 30
    assert body["stats"]["kObserved"] == 1
    assert body["stats"]["certifiedDataLinear"] is True
    assert body["diagnostics"] == []


def test_render_gallery_treemap_certified(client):
    r = client.post("/render", json={
        "program": client.get("/gallery").json()[0]["program"],
        "dataset": "treemap", "outputs": ["stats"]})
    assert r.status_code in (200, 400)
    r = client.post("/render", json={
        "program": next(e["program"] for e in client.get("/gallery").json()
                        if e["name"] == "treemap"),
        "dataset": "treemap", "outputs": ["stats"]})
    assert r.status_code == 200
    assert r.json()["stats"]["certifiedDataLinear"] is True


def test_validate_unknown_attribute(client):
    r = client.post("/validate", json={
        "program": "Visualization { FillEllipse { X=$Nope; Y=0; Width=.1; Height=.1; } }",
        "dataset": "plot2d"})
    assert r.status_code == 400
    assert any("Nope" in d for d in r.json()["diagnostics"])


def test_validate_returns_schema_summary(client):
    r = client.post("/validate", json={"program": PLOT, "dataset": "plot2d"})
    assert r.status_code == 200
    names = [a["name"] for a in r.json()["schema"]]
    assert len(names) == 8 and "Longitude" in names


def test_gallery_listing(client):
    r = client.get("/gallery")
    assert r.status_code == 200
    entries = r.json()
    assert len(entries) >= 10
    assert all("program" in e and "name" in e for e in entries)


def test_gallery_dataset_csv(client):
    r = client.get("/gallery/plot2d/data.csv", params={"rows": 5, "seed": 3})
    assert r.status_code == 200
    lines = r.text.strip().splitlines()
    assert lines[0].startswith("name,")
    assert len(lines) == 6


def test_gallery_unknown_404(client):
    assert client.get("/gallery/mosaic/data.csv").status_code == 404


def test_payload_cap_413():
    capped = TestClient(create_app(payload_limit=1024), raise_server_exceptions=False)
    big = "x" * 5000
    r = capped.post("/render", json={"program": PLOT, "data": big})
    assert r.status_code == 413


def test_bad_json_is_client_error(client):
    r = client.post("/render", content=b"{not json", headers={"content-type": "application/json"})
    assert 400 <= r.status_code < 500


def test_identical_requests_identical_bodies(client):
    csv = synth_cities(20, seed=5).to_csv()
    req = {"program": PLOT, "data": csv, "outputs": ["svg", "text"]}
    r1 = client.post("/render", json=req)
    r2 = client.post("/render", json=req)
    assert r1.content == r2.content


def test_http_matches_cli_byte_for_byte(client, tmp_path):
    csv = synth_cities(25, seed=7).to_csv()
    (tmp_path / "p.viz").write_text(PLOT)
    (tmp_path / "d.csv").write_text(csv)
    assert main(["render", "--program", str(tmp_path / "p.viz"),
                 "--data", str(tmp_path / "d.csv"),
                 "--out", str(tmp_path / "cli.svg"),
                 "--dump", str(tmp_path / "cli.txt")]) == 0
    r = client.post("/render", json={
        "program": PLOT, "data": csv, "outputs": ["svg", "text"]})
    assert r.json()["svg"] == (tmp_path / "cli.svg").read_text()
    assert r.json()["text"] == (tmp_path / "cli.txt").read_text()


def test_concurrent_identical_renders_identical(client):
    from concurrent.futures import ThreadPoolExecutor

    csv = synth_cities(30, seed=9).to_csv()
    req = {"program": PLOT, "data": csv, "outputs": ["svg", "stats"]}

    def call(_):
        return client.post("/render", json=req).content

    with ThreadPoolExecutor(max_workers=8) as pool:
        bodies = list(pool.map(call, range(16)))
    assert len(set(bodies)) == 1
