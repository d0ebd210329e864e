import math
from collections import Counter

import numpy as np
import pytest
from fastapi.testclient import TestClient

from choiceval.access import SBDC_COMPENSATION_LEVELS, fit_sbdc
from choiceval.attributes import fit_clogit
from choiceval.ingest import ingest_sbdc, ingest_sce
from choiceval.service import CollectionStore, ScreeningBody, create_app


@pytest.fixture(scope="module")
def client(design16):
    return TestClient(create_app(design16, seed=42))


def create_session(client, resident=True, uses_delivery=True, covariates=None):
    r = client.post(
        "/api/sessions",
        json={"screening": {"resident": resident, "uses_delivery": uses_delivery},
              **({"covariates": covariates} if covariates else {})},
    )
    assert r.status_code == 201
    return r.json()


def answer_full_session(client, plan, choice=lambda sc, t: 0, accept=lambda t: t % 2 == 0):
    sid = plan["session_id"]
    for t in range(1, 5):
        r = client.post(f"/api/sessions/{sid}/answers", json={
            "answer_id": f"{sid}-sbdc-{t}", "kind": "sbdc", "task_no": t,
            "accepted": accept(t), "dwell_ms": 2000,
        })
        assert r.status_code == 201, r.text
    for sc in ("work", "home"):
        for t in range(1, 5):
            r = client.post(f"/api/sessions/{sid}/answers", json={
                "answer_id": f"{sid}-sce-{sc}-{t}", "kind": "sce", "scenario": sc,
                "task_no": t, "chosen_index": choice(sc, t), "dwell_ms": 2500,
            })
            assert r.status_code == 201, r.text


class TestSessions:
    def test_health(self, client):
        r = client.get("/api/health")
        assert r.status_code == 200
        assert r.json()["status"] == "ok"

    def test_plan_shape(self, client):
        plan = create_session(client)
        assert plan["eligible"]
        assert len(plan["compensations"]) == 4
        assert len(set(plan["compensations"])) == 4
        assert all(c in SBDC_COMPENSATION_LEVELS for c in plan["compensations"])
        for sc in ("work", "home"):
            tasks = plan["sce_tasks"][sc]
            assert len(tasks) == 4
            assert len({t["task_id"] for t in tasks}) == 4

    def test_failed_screening_gets_no_tasks(self, client):
        plan = create_session(client, resident=False)
        assert not plan["eligible"]
        assert plan["compensations"] == []
        assert plan["sce_tasks"]["work"] == []

    def test_replay_plan(self, client):
        plan = create_session(client)
        r = client.get(f"/api/sessions/{plan['session_id']}")
        assert r.status_code == 200
        replay = r.json()
        assert replay["compensations"] == plan["compensations"]
        assert replay["sce_tasks"] == plan["sce_tasks"]

    def test_unknown_session_404(self, client):
        assert client.get("/api/sessions/s-999999").status_code == 404

    def test_deterministic_assignment_by_seed(self, design16):
        a = CollectionStore(design16, seed=7)
        b = CollectionStore(design16, seed=7)
        screening = ScreeningBody(resident=True, uses_delivery=True)
        for _ in range(5):
            sa = a.create_session(screening, None)
            sb = b.create_session(screening, None)
            assert sa.compensations == sb.compensations
            assert [[t.task_id for t in sa.tasks[sc]] for sc in ("work", "home")] == [
                [t.task_id for t in sb.tasks[sc]] for sc in ("work", "home")
            ]


class TestAnswers:
    def test_duplicate_answer_id_no_double_write(self, client):
        plan = create_session(client)
        sid = plan["session_id"]
        body = {"answer_id": f"{sid}-x", "kind": "sbdc", "task_no": 1, "accepted": True, "dwell_ms": 100}
        first = client.post(f"/api/sessions/{sid}/answers", json=body)
        assert first.status_code == 201
        second = client.post(f"/api/sessions/{sid}/answers", json=body)
        assert second.status_code == 200
        assert second.json()["status"] == "duplicate"
        export = client.get("/api/export?schema=sbdc").text
        assert export.count(f"{sid},1,") == 1

    def test_unknown_task_422(self, client):
        plan = create_session(client)
        r = client.post(f"/api/sessions/{plan['session_id']}/answers", json={
            "answer_id": "z1", "kind": "sbdc", "task_no": 7, "accepted": True,
        })
        assert r.status_code == 422

    def test_conflicting_reanswer_409(self, client):
        plan = create_session(client)
        sid = plan["session_id"]
        base = {"kind": "sce", "scenario": "work", "task_no": 1, "chosen_index": 0}
        assert client.post(f"/api/sessions/{sid}/answers", json={**base, "answer_id": "a1"}).status_code == 201
        r = client.post(f"/api/sessions/{sid}/answers", json={**base, "answer_id": "a2", "chosen_index": 1})
        assert r.status_code == 409

    def test_malformed_body_400(self, client):
        plan = create_session(client)
        r = client.post(
            f"/api/sessions/{plan['session_id']}/answers",
            content=b"{not json",
            headers={"content-type": "application/json"},
        )
        assert r.status_code == 400
        r2 = client.post(f"/api/sessions/{plan['session_id']}/answers", json={"answer_id": "q"})
        assert r2.status_code == 400

    def test_ineligible_session_rejects_answers(self, client):
        plan = create_session(client, uses_delivery=False)
        r = client.post(f"/api/sessions/{plan['session_id']}/answers", json={
            "answer_id": "n1", "kind": "sbdc", "task_no": 1, "accepted": True,
        })
        assert r.status_code == 422


class TestExport:
    def test_full_round_trip_ingests_and_fits(self, design16, tmp_path):
        client = TestClient(create_app(design16, seed=11))
        rng = np.random.default_rng(4)
        for _ in range(40):
            plan = create_session(client)
            answer_full_session(
                client, plan,
                choice=lambda sc, t: int(rng.random() < 0.5),
                accept=lambda t: bool(rng.random() < 0.5),
            )
        sbdc_path = tmp_path / "responses_sbdc.csv"
        sce_path = tmp_path / "responses_sce.csv"
        sbdc_path.write_text(client.get("/api/export?schema=sbdc").text)
        sce_path.write_text(client.get("/api/export?schema=sce").text)

        sbdc_data, _ = ingest_sbdc(sbdc_path)
        assert len(sbdc_data.observations) == 40 * 4
        sce_data, _ = ingest_sce(sce_path)
        assert len(sce_data.observations) == 40 * 8
        # random answers carry no signal, but both fits must run cleanly
        fit_sbdc(sbdc_data)
        fit_clogit(sce_data.subset_scenario("work"))

    def test_export_byte_stable(self, client):
        a = client.get("/api/export?schema=sce").text
        b = client.get("/api/export?schema=sce").text
        assert a == b

    def test_bad_schema_400(self, client):
        assert client.get("/api/export?schema=panel").status_code == 400

    def test_journal_survives_restart(self, design16, tmp_path):
        journal = tmp_path / "journal.jsonl"
        app1 = create_app(design16, seed=3, journal_path=journal)
        c1 = TestClient(app1)
        plan = create_session(c1)
        answer_full_session(c1, plan)
        before = c1.get("/api/export?schema=sce").text
        app2 = create_app(design16, seed=3, journal_path=journal)
        c2 = TestClient(app2)
        assert c2.get("/api/export?schema=sce").text == before
        replay = c2.get(f"/api/sessions/{plan['session_id']}")
        assert replay.status_code == 200
        assert replay.json()["compensations"] == plan["compensations"]


class TestAssignmentUniformity:
    def test_compensation_levels_uniform_over_10000_sessions(self, design16):
        store = CollectionStore(design16, seed=123)
        screening = ScreeningBody(resident=True, uses_delivery=True)
        counts: Counter = Counter()
        n = 10_000
        for _ in range(n):
            s = store.create_session(screening, None)
            counts.update(s.compensations)
        p = 4 / 7
        expected = n * p
        sigma = math.sqrt(n * p * (1 - p))
        for level in SBDC_COMPENSATION_LEVELS:
            assert abs(counts[level] - expected) < 3 * sigma, (level, counts[level])

    def test_task_assignment_uniform(self, design16):
        store = CollectionStore(design16, seed=321)
        screening = ScreeningBody(resident=True, uses_delivery=True)
        counts: Counter = Counter()
        n = 4_000
        for _ in range(n):
            s = store.create_session(screening, None)
            counts.update(t.task_id for t in s.tasks["work"])
        p = 4 / 16
        expected = n * p
        sigma = math.sqrt(n * p * (1 - p))
        for task in store.design.tasks:
            assert abs(counts[task.task_id] - expected) < 4 * sigma, task.task_id
