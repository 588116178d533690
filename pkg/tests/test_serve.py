import numpy as np
import pytest
from fastapi.testclient import TestClient

from ttir.data import Role, RuleSpec, Team, default_vocabs, synthetic_generate
from ttir.model import TTIRConfig, TTIRModel
from ttir.serve import ModelStore, create_app

N_CHAMP, N_ITEMS = 12, 30
CHAMPS, ITEMS = default_vocabs(N_CHAMP, N_ITEMS)


def make_client(allies_only=False, n_layers=1, n_heads=2):
    cfg = TTIRConfig(n_champions=N_CHAMP, n_items=N_ITEMS, d_model=8,
                     n_heads=n_heads, n_layers=n_layers, dropout=0.0,
                     allies_only=allies_only)
    model = TTIRModel.build(cfg, seed=0)
    store = ModelStore()
    store.set_loaded(model, CHAMPS, ITEMS, checkpoint_id="test-ckpt")
    return TestClient(create_app(store))


def sample_request(seed=0):
    matches, _ = synthetic_generate(1, N_CHAMP, N_ITEMS, RuleSpec(), seed)
    participants = [{"champion_name": CHAMPS.name(p.champion),
                     "role": p.role.name, "team": p.team.name}
                    for p in matches[0].participants]
    return {"participants": participants, "requesting_team": "BLUE"}


# ---------------------------------------------------------------------------
# lifecycle


def test_endpoints_return_503_before_load():
    client = TestClient(create_app(ModelStore()))
    for call in (lambda: client.get("/meta"),
                 lambda: client.post("/recommend", json=sample_request()),
                 lambda: client.post("/attention", json=sample_request())):
        resp = call()
        assert resp.status_code == 503
        body = resp.json()
        assert body["error"]["code"] == "model_not_loaded"


def test_cross_origin_requests_are_allowed():
    # the browser UI runs from a different origin than the API
    client = make_client()
    resp = client.post("/recommend", json=sample_request(),
                       headers={"Origin": "http://localhost:5000"})
    assert resp.status_code == 200
    assert resp.headers["access-control-allow-origin"] == "*"
    preflight = client.options(
        "/recommend",
        headers={"Origin": "http://localhost:5000",
                 "Access-Control-Request-Method": "POST",
                 "Access-Control-Request-Headers": "content-type"})
    assert preflight.status_code == 200
    assert "POST" in preflight.headers["access-control-allow-methods"]


def test_health_is_alive_before_and_after_load():
    store = ModelStore()
    client = TestClient(create_app(store))
    assert client.get("/health").json() == {"status": "ok", "model_loaded": False}
    cfg = TTIRConfig(n_champions=N_CHAMP, n_items=N_ITEMS, d_model=8, n_heads=2,
                     dropout=0.0)
    store.set_loaded(TTIRModel.build(cfg, seed=0), CHAMPS, ITEMS, "ckpt")
    assert client.get("/health").json() == {"status": "ok", "model_loaded": True}


def test_background_load_from_files(tmp_path):
    from ttir.train import save_checkpoint
    cfg = TTIRConfig(n_champions=N_CHAMP, n_items=N_ITEMS, d_model=8, n_heads=2,
                     dropout=0.0)
    model = TTIRModel.build(cfg, seed=3)
    ckpt = tmp_path / "m.ckpt"
    save_checkpoint(model, ckpt, champion_vocab=CHAMPS, item_vocab=ITEMS)
    CHAMPS.save(tmp_path / "champs.txt")
    ITEMS.save(tmp_path / "items.txt")
    store = ModelStore()
    thread = store.start_background_load(ckpt, tmp_path / "champs.txt",
                                         tmp_path / "items.txt")
    thread.join(timeout=10)
    client = TestClient(create_app(store))
    meta = client.get("/meta")
    assert meta.status_code == 200
    assert meta.json()["checkpoint_id"] == "m.ckpt"


def test_failed_load_surfaces_in_503_detail(tmp_path):
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"NOPE")
    CHAMPS.save(tmp_path / "champs.txt")
    ITEMS.save(tmp_path / "items.txt")
    store = ModelStore()
    thread = store.start_background_load(bad, tmp_path / "champs.txt",
                                         tmp_path / "items.txt")
    thread.join(timeout=10)
    resp = TestClient(create_app(store)).get("/meta")
    assert resp.status_code == 503
    assert "CheckpointError" in resp.json()["error"]["message"]


# ---------------------------------------------------------------------------
# /meta


def test_meta_echoes_vocabularies_and_config():
    client = make_client()
    body = client.get("/meta").json()
    assert len(body["champions"]) == N_CHAMP
    assert len(body["items"]) == N_ITEMS
    assert body["roles"] == ["TOP", "MID", "JUNGLE", "SUPPORT", "BOT"]
    assert body["config"]["d_model"] == 8
    assert body["config"]["n_heads"] == 2
    assert body["checkpoint_id"] == "test-ckpt"


# ---------------------------------------------------------------------------
# /recommend


def test_recommend_shape_and_determinism():
    client = make_client()
    req = sample_request()
    a = client.post("/recommend", json=req)
    b = client.post("/recommend", json=req)
    assert a.status_code == 200
    assert a.content == b.content  # byte-identical bodies
    body = a.json()
    assert body["requesting_team"] == "BLUE"
    assert len(body["recommendations"]) == 5
    for slot in body["recommendations"]:
        names = [it["name"] for it in slot["items"]]
        probs = [it["probability"] for it in slot["items"]]
        assert len(names) == 6
        assert len(set(names)) == 6
        assert probs == sorted(probs, reverse=True)
        assert all(0.0 <= p <= 1.0 for p in probs)


def test_recommend_attention_rows_are_stochastic_after_rounding():
    client = make_client()
    body = client.post("/recommend", json=sample_request()).json()
    rows = body["attention"]["rows"]
    assert len(rows) == 5
    for row in rows:
        assert len(row) == 10
        assert abs(sum(row) - 1.0) < 1e-4
    assert len(body["attention"]["column_labels"]) == 10
    assert len(body["attention"]["row_labels"]) == 5


def test_recommend_is_invariant_to_participant_order():
    client = make_client()
    req = sample_request(seed=1)
    rng = np.random.default_rng(0)
    shuffled = dict(req)
    shuffled["participants"] = [req["participants"][i]
                                for i in rng.permutation(10)]
    a = client.post("/recommend", json=req)
    b = client.post("/recommend", json=shuffled)
    assert a.content == b.content


def test_recommend_same_champions_regardless_of_block_order():
    """Red-team recommendations do not depend on where the red block sits in
    the request array."""
    client = make_client()
    req = sample_request(seed=2)
    swapped = dict(req)
    swapped["participants"] = req["participants"][5:] + req["participants"][:5]
    for team in ("BLUE", "RED"):
        ra = client.post("/recommend", json={**req, "requesting_team": team})
        rb = client.post("/recommend", json={**swapped, "requesting_team": team})
        assert ra.content == rb.content


def test_recommend_allies_only_payload():
    client = make_client(allies_only=True)
    body = client.post("/recommend", json=sample_request(seed=3)).json()
    assert len(body["recommendations"]) == 5
    rows = body["attention"]["rows"]
    assert len(rows) == 5
    for row in rows:
        assert len(row) == 5  # enemies never enter the encoder
    assert len(body["attention"]["column_labels"]) == 5


def test_recommend_duplicate_role_names_offending_slots():
    client = make_client()
    req = sample_request(seed=4)
    req["participants"][1]["role"] = req["participants"][0]["role"]  # second Blue TOP
    resp = client.post("/recommend", json=req)
    assert resp.status_code == 400
    err = resp.json()["error"]
    assert err["code"] == "duplicate_role"
    assert "participants.0" in err["fields"]
    assert "participants.1" in err["fields"]
    assert "BLUE TOP" in err["message"]


def test_recommend_unknown_champion_field_path():
    client = make_client()
    req = sample_request(seed=5)
    req["participants"][3]["champion_name"] = "champ_does_not_exist"
    resp = client.post("/recommend", json=req)
    assert resp.status_code == 400
    err = resp.json()["error"]
    assert err["code"] == "unknown_name"
    assert err["fields"] == ["participants.3.champion_name"]


def test_recommend_wrong_count():
    client = make_client()
    req = sample_request(seed=6)
    req["participants"] = req["participants"][:9]
    resp = client.post("/recommend", json=req)
    assert resp.status_code == 400
    assert resp.json()["error"]["code"] == "wrong_count"


def test_recommend_bad_team_value():
    client = make_client()
    req = sample_request(seed=7)
    req["requesting_team"] = "GREEN"
    resp = client.post("/recommend", json=req)
    assert resp.status_code == 400
    err = resp.json()["error"]
    assert err["code"] == "invalid_team"
    assert err["fields"] == ["requesting_team"]


def test_recommend_malformed_body_is_400_with_paths():
    client = make_client()
    resp = client.post("/recommend", json={"participants": "nope"})
    assert resp.status_code == 400
    err = resp.json()["error"]
    assert err["code"] == "invalid_request"
    assert any("participants" in f for f in err["fields"])
    assert any("requesting_team" in f for f in err["fields"])


def test_recommend_floats_are_six_significant_digits():
    client = make_client()
    body = client.post("/recommend", json=sample_request(seed=8)).json()
    for slot in body["recommendations"]:
        for item in slot["items"]:
            p = item["probability"]
            assert p == float(f"{p:.6g}")


# ---------------------------------------------------------------------------
# /attention


def test_attention_returns_all_layer_head_matrices():
    client = make_client(n_layers=2, n_heads=2)
    body = client.post("/attention", json=sample_request(seed=9)).json()
    assert body["n_layers"] == 2 and body["n_heads"] == 2
    assert len(body["matrices"]) == 4
    for entry in body["matrices"]:
        weights = np.array(entry["weights"])
        assert weights.shape == (10, 10)
        np.testing.assert_allclose(weights.sum(axis=1), np.ones(10), atol=1e-4)


def test_attention_single_layer_head_selection():
    client = make_client()
    req = {**sample_request(seed=10), "layer": 0, "head": 1}
    body = client.post("/attention", json=req).json()
    assert len(body["matrices"]) == 1
    assert body["matrices"][0]["layer"] == 0
    assert body["matrices"][0]["head"] == 1


def test_attention_out_of_range_layer_and_head():
    client = make_client()
    for patch, code in (({"layer": 1}, "layer_out_of_range"),
                        ({"head": 2}, "head_out_of_range"),
                        ({"layer": -1}, "layer_out_of_range")):
        resp = client.post("/attention", json={**sample_request(), **patch})
        assert resp.status_code == 400
        assert resp.json()["error"]["code"] == code


def test_attention_mean_matches_recommend_aggregate():
    client = make_client(n_layers=2, n_heads=2)
    req = sample_request(seed=11)
    rec_rows = np.array(client.post("/recommend", json=req).json()["attention"]["rows"])
    matrices = client.post("/attention", json=req).json()["matrices"]
    stacked = np.stack([np.array(m["weights"]) for m in matrices])
    mean = stacked.mean(axis=0)
    np.testing.assert_allclose(rec_rows, mean[:5], atol=1e-5)
