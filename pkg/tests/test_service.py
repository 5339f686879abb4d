import json

import pytest
from fastapi.testclient import TestClient

from parley import metrics
from parley.lm import EOS, TableLm, Vocab
from parley.service import create_app


@pytest.fixture
def client(tmp_path):
    return TestClient(create_app(str(tmp_path / "events.jsonl")))


def make_models():
    v = Vocab(["hello", "friend", "nice", "day"])
    m = TableLm.from_probs(
        v, {}, {"hello": 0.4, "friend": 0.2, "nice": 0.2, "day": 0.1, EOS: 0.1}
    )
    return {"toy": m}


def drive_session(client, model="generic", n_pairs=7, worker="w1",
                  sensible=True, specific=False, perplexity=None):
    config = {"model": model}
    if perplexity is not None:
        config["perplexity"] = perplexity
    sid = client.post("/sessions", json=config).json()["session_id"]
    for i in range(n_pairs):
        r = client.post(f"/sessions/{sid}/turns", json={"text": f"turn {i}?"})
        assert r.status_code == 200, r.text
    session = client.get(f"/sessions/{sid}").json()
    for idx, turn in enumerate(session["turns"]):
        if turn["speaker"] == "bot":
            client.post(
                f"/sessions/{sid}/labels",
                json={"turn_index": idx, "worker": worker,
                      "sensible": sensible, "specific": specific},
            )
    r = client.post(f"/sessions/{sid}/finish")
    assert r.status_code == 200, r.text
    return sid


class TestSessions:
    def test_create_opens_with_hi(self, client):
        r = client.post("/sessions", json={"model": "generic"})
        assert r.status_code == 200
        assert r.json()["opener"] == {"speaker": "bot", "text": "Hi!"}

    def test_create_unknown_model_404(self, client):
        r = client.post("/sessions", json={"model": "missing"})
        assert r.status_code == 404
        body = r.json()
        assert set(body) == {"code", "reason", "detail"}
        assert body["code"] == "not_found"

    def test_two_creates_distinct_ids(self, client):
        a = client.post("/sessions", json={}).json()["session_id"]
        b = client.post("/sessions", json={}).json()["session_id"]
        assert a != b

    def test_turn_round_trip(self, client):
        sid = client.post("/sessions", json={}).json()["session_id"]
        r = client.post(f"/sessions/{sid}/turns", json={"text": "How are you?"})
        assert r.json()["bot_turn"]["text"] == "I don't know"
        r = client.post(f"/sessions/{sid}/turns", json={"text": "I am fine."})
        assert r.json()["bot_turn"]["text"] == "ok"
        session = client.get(f"/sessions/{sid}").json()
        assert [t["speaker"] for t in session["turns"]] == ["bot", "user", "bot", "user", "bot"]

    def test_lm_bot_turns_with_diagnostics(self, tmp_path):
        client = TestClient(create_app(str(tmp_path / "e.jsonl"), make_models()))
        sid = client.post(
            "/sessions", json={"model": "toy", "seed": 7, "num_samples": 5,
                               "max_response_tokens": 4}
        ).json()["session_id"]
        r = client.post(
            f"/sessions/{sid}/turns",
            json={"text": "hello there", "include_diagnostics": True},
        )
        diag = r.json()["diagnostics"]
        assert len(diag["candidates"]) == 5
        assert "forced" in diag and "removals" in diag

    def test_protocol_violation_409(self, client):
        sid = client.post("/sessions", json={}).json()["session_id"]
        r = client.post(f"/sessions/{sid}/finish")
        assert r.status_code == 409
        body = r.json()
        assert body["code"] == "session_too_short"
        assert set(body) == {"code", "reason", "detail"}

    def test_unknown_session_404(self, client):
        assert client.get("/sessions/nope").status_code == 404


class TestLabels:
    def test_coercion_applied(self, client):
        sid = client.post("/sessions", json={}).json()["session_id"]
        client.post(
            f"/sessions/{sid}/labels",
            json={"turn_index": 0, "worker": "w", "sensible": False, "specific": True},
        )
        labels = client.get(f"/sessions/{sid}").json()["labels"]
        assert labels["0"]["w"] == {"sensible": False, "specific": False}

    def test_label_on_user_turn_rejected(self, client):
        sid = client.post("/sessions", json={}).json()["session_id"]
        client.post(f"/sessions/{sid}/turns", json={"text": "hello there"})
        r = client.post(
            f"/sessions/{sid}/labels",
            json={"turn_index": 1, "worker": "w", "sensible": True, "specific": True},
        )
        assert r.status_code == 409
        assert r.json()["code"] == "label_on_user_turn"

    def test_duplicate_label_overwrites(self, client):
        sid = client.post("/sessions", json={}).json()["session_id"]
        for specific in (False, True):
            client.post(
                f"/sessions/{sid}/labels",
                json={"turn_index": 0, "worker": "w", "sensible": True,
                      "specific": specific},
            )
        labels = client.get(f"/sessions/{sid}").json()["labels"]
        assert labels["0"] == {"w": {"sensible": True, "specific": True}}


class TestSummary:
    def test_empty_store(self, client):
        body = client.get("/summary").json()
        assert body["code"] == "not_enough_data"

    def test_single_config_no_regression(self, client):
        drive_session(client)
        body = client.get("/summary").json()
        assert len(body["configs"]) == 1
        assert body["regression"]["code"] == "not_enough_data"

    def test_matches_offline_metrics(self, client):
        drive_session(client, sensible=True, specific=False)
        body = client.get("/summary").json()
        cfg = body["configs"][0]
        turns = [metrics.TurnLabels((True,), (False,)) for _ in range(cfg["n_turns"])]
        offline = metrics.aggregate(turns)
        assert cfg["sensibleness"] == offline.sensibleness
        assert cfg["specificity"] == offline.specificity
        assert cfg["ssa"] == offline.ssa

    def test_regression_across_configs(self, client):
        drive_session(client, sensible=True, specific=True, perplexity=2.0)
        drive_session(client, sensible=True, specific=False, perplexity=4.0)
        drive_session(client, sensible=False, specific=False, perplexity=8.0)
        body = client.get("/summary").json()
        assert len(body["configs"]) == 3
        fit = body["regression"]
        xs = [c["perplexity"] for c in body["configs"]]
        ys = [c["ssa"] for c in body["configs"]]
        offline = metrics.fit_line(xs, ys)
        assert fit["slope"] == pytest.approx(offline.slope)
        assert fit["r_squared"] == pytest.approx(offline.r_squared)

    def test_label_idempotence(self, client):
        sid = drive_session(client)
        before = client.get("/summary").text
        # labels are rejected after completion; idempotence is re-sending
        # the identical record during an active session
        sid2 = client.post("/sessions", json={}).json()["session_id"]
        for _ in range(3):
            client.post(
                f"/sessions/{sid2}/labels",
                json={"turn_index": 0, "worker": "w", "sensible": True,
                      "specific": True},
            )
        assert client.get("/summary").text == before


class TestReplay:
    def test_restart_reconstructs_sessions(self, tmp_path):
        path = str(tmp_path / "events.jsonl")
        client = TestClient(create_app(path))
        sid = drive_session(client)
        before_session = client.get(f"/sessions/{sid}").text
        before_summary = client.get("/summary").text

        replayed = TestClient(create_app(path))
        assert replayed.get(f"/sessions/{sid}").text == before_session
        assert replayed.get("/summary").text == before_summary

    def test_restart_mid_session_continues(self, tmp_path):
        path = str(tmp_path / "events.jsonl")
        client = TestClient(create_app(path))
        sid = client.post("/sessions", json={}).json()["session_id"]
        client.post(f"/sessions/{sid}/turns", json={"text": "hello?"})

        replayed = TestClient(create_app(path))
        r = replayed.post(f"/sessions/{sid}/turns", json={"text": "still here"})
        assert r.status_code == 200
        session = replayed.get(f"/sessions/{sid}").json()
        assert len(session["turns"]) == 5

    def test_log_is_append_only_json_lines(self, tmp_path):
        path = str(tmp_path / "events.jsonl")
        client = TestClient(create_app(path))
        drive_session(client, n_pairs=7)
        seqs = []
        with open(path) as f:
            for line in f:
                rec = json.loads(line)
                seqs.append(rec["seq"])
                assert set(rec) == {"seq", "session_id", "ts", "event"}
        assert seqs == sorted(seqs) and len(set(seqs)) == len(seqs)


def test_models_endpoint(tmp_path):
    client = TestClient(create_app(str(tmp_path / "e.jsonl"), make_models()))
    assert client.get("/models").json() == {"models": ["generic", "toy"]}
