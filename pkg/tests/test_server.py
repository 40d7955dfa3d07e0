from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from flowdialog.server import create_app

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def client():
    return TestClient(create_app())


@pytest.fixture
def delete_client():
    return TestClient(create_app(events_path=str(FIXTURES / "ex1_store.json")))


def make_session(client) -> str:
    r = client.post("/v1/sessions")
    assert r.status_code == 200
    return r.json()["session_id"]


def test_create_and_simple_turn(client):
    sid = make_session(client)
    r = client.post(f"/v1/sessions/{sid}/turns", json={"text": "Add(2,Add(3,5))"})
    assert r.status_code == 200
    body = r.json()
    assert body["kind"] == "success"
    assert body["message"] == "10"
    assert body["graph"]["version"] == "v1"


def test_unknown_session_404(client):
    r = client.post("/v1/sessions/nope/turns", json={"text": "1"})
    assert r.status_code == 404
    assert r.json()["error"]["code"] == "unknown_session"
    assert client.get("/v1/sessions/nope/graph").status_code == 404
    assert client.delete("/v1/sessions/nope").status_code == 404


def test_malformed_body_400(client):
    sid = make_session(client)
    r = client.post(f"/v1/sessions/{sid}/turns", json={"nope": 1})
    assert r.status_code == 400
    r = client.post(
        f"/v1/sessions/{sid}/turns",
        content=b"{{{",
        headers={"content-type": "application/json"},
    )
    assert r.status_code == 400
    r = client.post(f"/v1/sessions/{sid}/turns", json={"text": "1", "syntax": "klingon"})
    assert r.status_code == 400


def test_appendix_dialogue_over_http_shares_nodes(client):
    sid = make_session(client)
    r1 = client.post(f"/v1/sessions/{sid}/turns", json={"text": "Add(2,Add(3,5))"})
    assert r1.json()["message"] == "10"
    r2 = client.post(f"/v1/sessions/{sid}/turns",
                     json={"text": "revise(old=Int?(3), new=Int(6))"})
    body = r2.json()
    assert body["message"] == "13"
    snap = body["graph"]
    nodes = {n["id"]: n for n in snap["nodes"]}
    roots = [t["root"] for t in snap["turns"]]

    def reach(root):
        seen, stack = set(), [root]
        while stack:
            nid = stack.pop()
            if nid in seen:
                continue
            seen.add(nid)
            stack.extend(nodes[nid]["inputs"].values())
        return seen

    shared = reach(roots[0]) & reach(roots[1])
    shared_values = {nodes[n]["value"] for n in shared if nodes[n]["func"] == "Int"}
    assert {2, 5} <= shared_values
    new_adds = [n for n in reach(roots[1]) - reach(roots[0])
                if nodes[n]["func"] == "Add"]
    assert len(new_adds) == 2


def test_pending_payload_and_resume(client):
    sid = make_session(client)
    r = client.post(f"/v1/sessions/{sid}/turns", json={"text": "Add(2)"})
    body = r.json()
    assert body["kind"] == "pending"
    assert body["pending"]["param"] == "pos2"
    r = client.post(f"/v1/sessions/{sid}/turns", json={"text": "7"})
    assert r.json()["message"] == "9"


def test_delete_flow_over_http(delete_client):
    sid = make_session(delete_client)
    r = delete_client.post(
        f"/v1/sessions/{sid}/turns",
        json={"text": "DeleteEvent(starts_at(tomorrow(),NumberAM(10)))"})
    assert r.json()["kind"] == "pending"
    r = delete_client.post(f"/v1/sessions/{sid}/turns", json={"text": "Confirm()"})
    assert r.json()["message"].startswith("deleted ")


def test_graph_endpoints(client):
    sid = make_session(client)
    client.post(f"/v1/sessions/{sid}/turns", json={"text": "Add(1,2)"})
    snap = client.get(f"/v1/sessions/{sid}/graph").json()
    assert snap["version"] == "v1" and len(snap["turns"]) == 1
    dot = client.get(f"/v1/sessions/{sid}/graph.dot")
    assert dot.status_code == 200
    assert dot.text.startswith("digraph")
    assert client.get(f"/v1/sessions/{sid}/graph.dot", params={"turn": 7}).status_code == 404


def test_sessions_are_isolated(client):
    a, b = make_session(client), make_session(client)
    client.post(f"/v1/sessions/{a}/turns", json={"text": "Add(1,1)"})
    snap_b = client.get(f"/v1/sessions/{b}/graph").json()
    assert snap_b["nodes"] == []


def test_delete_session(client):
    sid = make_session(client)
    assert client.delete(f"/v1/sessions/{sid}").status_code == 200
    assert client.get(f"/v1/sessions/{sid}/graph").status_code == 404


def test_prefix_syntax_over_http(client):
    sid = make_session(client)
    r = client.post(f"/v1/sessions/{sid}/turns",
                    json={"text": "(Yield (Add 2 3))", "syntax": "prefix"})
    assert r.json()["message"] == "5"
