import numpy as np
import pytest
from fastapi.testclient import TestClient

from advspk.audio import Waveform, write_wav
from advspk.benchmark import BenchmarkSet, RecordStore, create_app
from advspk.evaluation import TrialPair


@pytest.fixture()
def service(tmp_path):
    rng = np.random.default_rng(0)
    trials = []
    for i in range(4):
        a, b = f"wavs/a{i}.wav", f"wavs/b{i}.wav"
        write_wav(tmp_path / a, Waveform(rng.standard_normal(1600) * 0.1))
        write_wav(tmp_path / b, Waveform(rng.standard_normal(1600) * 0.1))
        trials.append(TrialPair(1 if i < 2 else 0, a, b))  # both classes per subset
    benchmark = BenchmarkSet.from_trials(trials, n_subsets=2)
    store = RecordStore(tmp_path / "records")
    app = create_app(benchmark, store, audio_root=tmp_path)
    return TestClient(app), benchmark, store


def test_task_payload_has_audio_urls_and_no_label(service):
    client, benchmark, _ = service
    task = client.get("/api/next", params={"annotator": "ann0"}).json()
    assert not task["done"]
    assert task["pair_id"] in {p.pair_id for p in benchmark.pairs}
    assert task["remaining_in_subset"] == 2
    assert task["time_limit_s"] == 30.0
    assert "label" not in task
    for side in ("a", "b"):
        resp = client.get(task[f"audio_url_{side}"])
        assert resp.status_code == 200
        assert resp.headers["content-type"] == "audio/wav"
        assert resp.content[:4] == b"RIFF"


def test_full_annotation_flow(service):
    client, _, store = service
    seen = []
    while True:
        task = client.get("/api/next", params={"annotator": "ann0"}).json()
        if task["done"]:
            break
        seen.append(task["pair_id"])
        resp = client.post("/api/annotate", json={
            "pair_id": task["pair_id"], "annotator_id": "ann0",
            "score": 4, "elapsed_s": 9.5})
        assert resp.status_code == 200
        assert resp.json()["status"] == "stored"
    assert len(seen) == 2
    progress = client.get("/api/progress", params={"annotator": "ann0"}).json()
    assert progress["completed"] == 2 and progress["remaining"] == 0


def test_invalid_score_is_422(service):
    client, _, _ = service
    task = client.get("/api/next", params={"annotator": "ann0"}).json()
    resp = client.post("/api/annotate", json={
        "pair_id": task["pair_id"], "annotator_id": "ann0",
        "score": 6, "elapsed_s": 2.0})
    assert resp.status_code == 422


def test_conflicting_duplicate_is_409_and_identical_retry_is_200(service):
    client, _, store = service
    task = client.get("/api/next", params={"annotator": "ann0"}).json()
    body = {"pair_id": task["pair_id"], "annotator_id": "ann0",
            "score": 2, "elapsed_s": 5.0}
    assert client.post("/api/annotate", json=body).status_code == 200
    assert client.post("/api/annotate", json=body).status_code == 200  # retry
    assert len(store.records()) == 1
    conflicting = dict(body, score=5)
    assert client.post("/api/annotate", json=conflicting).status_code == 409


def test_skip_advances_without_a_score(service):
    client, _, store = service
    task = client.get("/api/next", params={"annotator": "ann0"}).json()
    resp = client.post("/api/annotate", json={
        "pair_id": task["pair_id"], "annotator_id": "ann0", "skipped": True})
    assert resp.json()["status"] == "skipped"
    nxt = client.get("/api/next", params={"annotator": "ann0"}).json()
    assert nxt["pair_id"] != task["pair_id"]
    assert store.records() == []
    assert len(store.skips()) == 1


def test_metrics_endpoint(service):
    client, benchmark, _ = service
    labels = {p.pair_id: p.label for p in benchmark.pairs}
    for annotator in ("ann0", "ann1"):
        while True:
            task = client.get("/api/next", params={"annotator": annotator}).json()
            if task["done"]:
                break
            truth = labels[task["pair_id"]]
            client.post("/api/annotate", json={
                "pair_id": task["pair_id"], "annotator_id": annotator,
                "score": 5 if truth else 1, "elapsed_s": 4.0})
    metrics = client.get("/api/metrics", params={"subset": "all"}).json()
    assert metrics["n"] == 4
    assert metrics["eer"] == 0.0
    assert metrics["auroc"] == 1.0
    assert metrics["accuracy"] == 1.0
    subset = client.get("/api/metrics", params={"subset": "A"}).json()
    assert subset["n"] == 2


def test_csv_export_round_trip(service):
    client, _, _ = service
    task = client.get("/api/next", params={"annotator": "ann0"}).json()
    client.post("/api/annotate", json={
        "pair_id": task["pair_id"], "annotator_id": "ann0",
        "score": 3, "elapsed_s": 12.5})
    text = client.get("/api/export.csv").text
    lines = text.strip().splitlines()
    assert lines[0] == "pair_id,annotator_id,score,elapsed_s,timestamp"
    assert len(lines) == 2
    assert lines[1].startswith(f"{task['pair_id']},ann0,3,12.5,")


def test_exhausted_annotator_sees_done_and_newcomers_get_409(service):
    client, _, _ = service
    for annotator in ("ann0", "ann1"):
        while True:
            task = client.get("/api/next", params={"annotator": annotator}).json()
            if task["done"]:
                break
            client.post("/api/annotate", json={
                "pair_id": task["pair_id"], "annotator_id": annotator,
                "score": 1, "elapsed_s": 1.0})
    done = client.get("/api/next", params={"annotator": "ann0"}).json()
    assert done["done"] is True
    resp = client.get("/api/next", params={"annotator": "newcomer"})
    assert resp.status_code == 409


def test_unknown_audio_404(service):
    client, _, _ = service
    assert client.get("/audio/pair99999/a").status_code == 404
    task = client.get("/api/next", params={"annotator": "ann0"}).json()
    assert client.get(f"/audio/{task['pair_id']}/c").status_code == 404
