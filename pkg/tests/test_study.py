import json
import threading

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from recolor.errors import (
    ConfigError,
    ProtocolError,
    SessionNotFoundError,
    UndefinedStatisticError,
)
from recolor.study import (
    JudgmentStore,
    PoolEntry,
    SessionManager,
    StudyPool,
    build_app,
    create_session,
    results_to_tsv,
    session_results,
)

METHODS = ("real", "model_a", "model_b", "baseline")


def build_pool(tmp_path, per_method=5, methods=METHODS):
    root = tmp_path / "pool"
    root.mkdir(exist_ok=True)
    rng = np.random.default_rng(0)
    entries = []
    for m_idx, method in enumerate(methods):
        for i in range(per_method):
            path = root / f"{m_idx:02d}_{i:03d}.png"
            Image.fromarray(rng.integers(0, 256, (8, 8, 3), dtype=np.uint8)).save(path)
            entries.append(PoolEntry(f"item-{m_idx:02d}-{i:03d}", method, path))
    return StudyPool(entries)


def manager_for(tmp_path, pool=None, **kwargs):
    pool = pool or build_pool(tmp_path)
    store = JudgmentStore(tmp_path / "judgments.jsonl")
    kwargs.setdefault("k", 4)
    kwargs.setdefault("seed", 0)
    return SessionManager(pool, store, **kwargs)


def test_pool_requires_unique_ids(tmp_path):
    pool = build_pool(tmp_path, per_method=1)
    dupes = pool.entries + [pool.entries[0]]
    with pytest.raises(ConfigError):
        StudyPool(dupes)


def test_pool_requires_readable_paths(tmp_path):
    with pytest.raises(ConfigError):
        StudyPool([PoolEntry("x", "m", tmp_path / "missing.png")])


def test_manifest_round_trip(tmp_path):
    pool = build_pool(tmp_path, per_method=2)
    manifest = tmp_path / "pool.tsv"
    manifest.write_text(
        "# image_id\tmethod\tpath\n"
        + "\n".join(f"{e.image_id}\t{e.method_id}\t{e.path}" for e in pool.entries)
        + "\n"
    )
    loaded = StudyPool.from_manifest(manifest)
    assert loaded.image_ids() == pool.image_ids()
    assert [e.method_id for e in loaded.entries] == [e.method_id for e in pool.entries]


def test_manifest_rejects_malformed_rows(tmp_path):
    manifest = tmp_path / "bad.tsv"
    manifest.write_text("only-two\tfields\n")
    with pytest.raises(ConfigError):
        StudyPool.from_manifest(manifest)


def test_create_session_draws_without_replacement(tmp_path):
    pool = build_pool(tmp_path)
    session = create_session(pool, k=10, seed=1)
    assert len(session.image_ids) == 10
    assert len(set(session.image_ids)) == 10


def test_create_session_exhaustive_draw_is_permutation(tmp_path):
    pool = build_pool(tmp_path, per_method=2)
    session = create_session(pool, k=len(pool), seed=3)
    assert sorted(session.image_ids) == sorted(pool.image_ids())


def test_create_session_rejects_oversized_k(tmp_path):
    pool = build_pool(tmp_path, per_method=1)
    with pytest.raises(ConfigError):
        create_session(pool, k=len(pool) + 1)


def test_create_session_seed_determinism(tmp_path):
    pool = build_pool(tmp_path)
    a = create_session(pool, k=8, seed=42)
    b = create_session(pool, k=8, seed=42)
    assert a.session_id == b.session_id
    assert a.image_ids == b.image_ids


def test_sessions_with_different_seeds_differ(tmp_path):
    pool = build_pool(tmp_path, per_method=30)
    differing = sum(
        create_session(pool, k=20, seed=s).image_ids
        != create_session(pool, k=20, seed=s + 1000).image_ids
        for s in range(20)
    )
    assert differing == 20


def test_judgment_advances_cursor_and_persists(tmp_path):
    manager = manager_for(tmp_path)
    session = manager.start()
    first = session.current_image_id()
    manager.record_judgment(session.session_id, first, True)
    assert session.cursor == 1
    records = manager.store.records()
    assert len(records) == 1
    assert records[0]["image_id"] == first
    assert records[0]["realistic"] is True


def test_duplicate_judgment_rejected_store_unchanged(tmp_path):
    manager = manager_for(tmp_path)
    session = manager.start()
    first = session.current_image_id()
    manager.record_judgment(session.session_id, first, True)
    with pytest.raises(ProtocolError):
        manager.record_judgment(session.session_id, first, False)
    assert len(manager.store.records()) == 1


def test_out_of_order_judgment_names_expected(tmp_path):
    manager = manager_for(tmp_path)
    session = manager.start()
    wrong = session.image_ids[2]
    with pytest.raises(ProtocolError) as err:
        manager.record_judgment(session.session_id, wrong, True)
    assert session.image_ids[0] in str(err.value)
    assert manager.store.records() == []


def test_unknown_session_rejected(tmp_path):
    manager = manager_for(tmp_path)
    with pytest.raises(SessionNotFoundError):
        manager.record_judgment("nope", "img", True)


def test_store_is_append_only(tmp_path):
    manager = manager_for(tmp_path)
    session = manager.start()
    sizes = []
    for image_id in session.image_ids:
        manager.record_judgment(session.session_id, image_id, True)
        sizes.append(manager.store.path.stat().st_size)
    assert sizes == sorted(sizes)
    assert len(manager.store.records()) == session.size


def test_concurrent_appends_lose_nothing(tmp_path):
    manager = manager_for(tmp_path, k=6)
    sessions = [manager.start() for _ in range(8)]

    def judge_all(session):
        for image_id in session.image_ids:
            manager.record_judgment(session.session_id, image_id, True)

    threads = [threading.Thread(target=judge_all, args=(s,)) for s in sessions]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(manager.store.records()) == 8 * 6


def test_session_results_joins_hidden_labels(tmp_path):
    pool = build_pool(tmp_path, per_method=2, methods=("real", "model_a"))
    store = JudgmentStore(tmp_path / "j.jsonl")
    by_method = {e.image_id: e.method_id for e in pool.entries}
    votes = {"real": [True, True], "model_a": [True, False]}
    for entry in pool.entries:
        store.append("s1", entry.image_id, votes[by_method[entry.image_id]].pop())
    rows = {r["method_id"]: r for r in session_results(pool, store)}
    assert rows["real"]["naturalness_pct"] == 100.0
    assert rows["model_a"]["naturalness_pct"] == 50.0
    assert rows["real"]["judged"] == 2


def test_session_results_counts_skips_separately(tmp_path):
    pool = build_pool(tmp_path, per_method=2, methods=("model_a",))
    store = JudgmentStore(tmp_path / "j.jsonl")
    store.append("s1", pool.entries[0].image_id, True)
    store.append("s1", pool.entries[1].image_id, None)
    rows = session_results(pool, store)
    assert rows[0]["judged"] == 1
    assert rows[0]["skipped"] == 1
    assert rows[0]["naturalness_pct"] == 100.0


def test_session_results_empty_store_rejected(tmp_path):
    pool = build_pool(tmp_path, per_method=1)
    store = JudgmentStore(tmp_path / "j.jsonl")
    with pytest.raises(UndefinedStatisticError):
        session_results(pool, store)


def test_results_tsv_format(tmp_path):
    pool = build_pool(tmp_path, per_method=1, methods=("m",))
    store = JudgmentStore(tmp_path / "j.jsonl")
    store.append("s1", pool.entries[0].image_id, True)
    tsv = results_to_tsv(session_results(pool, store))
    assert tsv.splitlines()[0] == "method_id\tjudged\tnaturalness_pct\tskipped"
    assert "m\t1\t100.0000\t0" in tsv


# --- HTTP API ---------------------------------------------------------------


@pytest.fixture
def client(tmp_path):
    manager = manager_for(tmp_path, k=3)
    return TestClient(build_app(manager)), manager


def test_api_session_flow(client):
    api, manager = client
    created = api.post("/api/v1/sessions").json()
    assert created["v"] == 1
    assert created["k"] == 3 and created["cursor"] == 0
    sid = created["session_id"]

    for step in range(3):
        current = api.get(f"/api/v1/sessions/{sid}/current").json()
        assert current["cursor"] == step
        image = api.get(f"/api/v1/images/{current['image_id']}")
        assert image.status_code == 200
        assert image.headers["content-type"] == "image/png"
        posted = api.post(
            f"/api/v1/sessions/{sid}/judgments",
            json={"image_id": current["image_id"], "realistic": step % 2 == 0},
        )
        assert posted.status_code == 200
    final = api.get(f"/api/v1/sessions/{sid}/current").json()
    assert final["complete"] is True
    assert len(manager.store.records()) == 3


def test_api_participant_payloads_hide_methods(client):
    api, manager = client
    method_tokens = {e.method_id for e in manager.pool.entries}
    created = api.post("/api/v1/sessions").json()
    sid = created["session_id"]
    payloads = [json.dumps(created)]
    current = api.get(f"/api/v1/sessions/{sid}/current").json()
    payloads.append(json.dumps(current))
    posted = api.post(
        f"/api/v1/sessions/{sid}/judgments",
        json={"image_id": current["image_id"], "realistic": True},
    ).json()
    payloads.append(json.dumps(posted))
    for payload in payloads:
        assert "method" not in payload
        for token in method_tokens:
            assert token not in payload


def test_api_duplicate_judgment_conflict(client):
    api, _ = client
    sid = api.post("/api/v1/sessions").json()["session_id"]
    image_id = api.get(f"/api/v1/sessions/{sid}/current").json()["image_id"]
    assert api.post(
        f"/api/v1/sessions/{sid}/judgments", json={"image_id": image_id, "realistic": True}
    ).status_code == 200
    dup = api.post(
        f"/api/v1/sessions/{sid}/judgments", json={"image_id": image_id, "realistic": True}
    )
    assert dup.status_code == 409


def test_api_unknown_session_404(client):
    api, _ = client
    assert api.get("/api/v1/sessions/bogus/current").status_code == 404
    assert api.post(
        "/api/v1/sessions/bogus/judgments", json={"image_id": "x", "realistic": True}
    ).status_code == 404


def test_api_skip_payload_marks_abandonment(client):
    api, manager = client
    sid = api.post("/api/v1/sessions").json()["session_id"]
    image_id = api.get(f"/api/v1/sessions/{sid}/current").json()["image_id"]
    posted = api.post(
        f"/api/v1/sessions/{sid}/judgments", json={"image_id": image_id, "realistic": None}
    )
    assert posted.status_code == 200
    assert manager.store.records()[0]["realistic"] is None


def test_api_results_surface(client):
    api, manager = client
    sid = api.post("/api/v1/sessions").json()["session_id"]
    image_id = api.get(f"/api/v1/sessions/{sid}/current").json()["image_id"]
    api.post(f"/api/v1/sessions/{sid}/judgments", json={"image_id": image_id, "realistic": True})
    results = api.get("/api/v1/results").json()
    assert results["v"] == 1
    assert len(results["methods"]) == 1
    assert results["methods"][0]["judged"] == 1


def test_api_time_limit_advertised(tmp_path):
    manager = manager_for(tmp_path, k=2, time_limit_ms=1500)
    api = TestClient(build_app(manager))
    created = api.post("/api/v1/sessions").json()
    assert created["time_limit_ms"] == 1500
