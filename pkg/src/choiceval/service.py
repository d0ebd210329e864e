"""Response-collection HTTP service administering the survey instrument.

Sessions are created with a plan: four distinct compensation amounts from the
seven-level grid and four stated-choice tasks per scenario drawn from the
active design, all from per-session substreams of one service seed (so
assignment is reproducible and statistically uniform across sessions).
Answers are validated against the plan, persisted append-only, and idempotent
on a client-supplied answer id. Export produces the exact CSV schemas the
ingestion layer reads, byte-stable for identical stores.

Status codes: unknown session 404, answer outside the plan 422, duplicate
answer id 200 without a double write, conflicting re-answer of a task 409,
malformed body 400.
"""

from __future__ import annotations

import io
import csv
import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel, Field

from .access import SBDC_COMPENSATION_LEVELS
from .core import ChoiceTask
from .covariates import COMPLETION_SECONDS
from .design import Design

SBDC_TASKS = 4
SCE_TASKS_PER_SCENARIO = 4
SCENARIOS = ("work", "home")


class ScreeningBody(BaseModel):
    resident: bool
    uses_delivery: bool


class CreateSessionBody(BaseModel):
    screening: ScreeningBody
    covariates: dict[str, float] | None = None


class AnswerBody(BaseModel):
    answer_id: str = Field(min_length=1)
    kind: Literal["sbdc", "sce"]
    task_no: int
    accepted: bool | None = None
    scenario: Literal["work", "home"] | None = None
    chosen_index: int | None = None
    dwell_ms: float = 0.0


@dataclass
class SessionState:
    session_id: str
    eligible: bool
    compensations: list[float]
    tasks: dict[str, list[ChoiceTask]]
    covariates: dict[str, float]
    created_at: float
    answers: dict[tuple, dict] = field(default_factory=dict)  # position key -> answer
    answer_ids: dict[str, tuple] = field(default_factory=dict)


def _task_payload(task: ChoiceTask) -> dict:
    return {
        "task_id": task.task_id,
        "alternatives": [
            {"wait": a.wait, "cost": a.cost, "unrel": a.unrel} for a in task.alternatives
        ],
    }


def _plan_payload(s: SessionState) -> dict:
    return {
        "session_id": s.session_id,
        "eligible": s.eligible,
        "compensations": s.compensations,
        "sce_tasks": {sc: [_task_payload(t) for t in s.tasks[sc]] for sc in SCENARIOS},
        "sbdc_task_count": SBDC_TASKS if s.eligible else 0,
        "created_at": s.created_at,
    }


class CollectionStore:
    """In-memory session/answer store with an append-only JSONL journal."""

    def __init__(self, design: Design, seed: int = 0, journal_path: str | Path | None = None):
        self.design = design
        self.seed = seed
        self.journal_path = Path(journal_path) if journal_path else None
        self.sessions: dict[str, SessionState] = {}
        self._order: list[str] = []
        self._lock = threading.Lock()
        self._counter = 0
        if self.journal_path and self.journal_path.exists():
            self._replay_journal()

    # -- journaling

    def _append_journal(self, record: dict) -> None:
        if not self.journal_path:
            return
        with open(self.journal_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")

    def _replay_journal(self) -> None:
        with open(self.journal_path, encoding="utf-8") as fh:
            for line in fh:
                rec = json.loads(line)
                if rec["type"] == "session":
                    self._restore_session(rec)
                elif rec["type"] == "answer":
                    s = self.sessions[rec["session_id"]]
                    key = tuple(rec["key"])
                    s.answers[key] = rec["answer"]
                    s.answer_ids[rec["answer"]["answer_id"]] = key

    def _restore_session(self, rec: dict) -> None:
        plan = rec["plan"]
        tasks = {
            sc: [self._task_by_id(t["task_id"]) for t in plan["sce_tasks"][sc]]
            for sc in SCENARIOS
        }
        s = SessionState(
            session_id=plan["session_id"],
            eligible=plan["eligible"],
            compensations=plan["compensations"],
            tasks=tasks,
            covariates=rec.get("covariates", {}),
            created_at=plan["created_at"],
        )
        self.sessions[s.session_id] = s
        self._order.append(s.session_id)
        self._counter = max(self._counter, int(s.session_id.split("-")[1]) + 1)

    def _task_by_id(self, task_id: str) -> ChoiceTask:
        for t in self.design.tasks:
            if t.task_id == task_id:
                return t
        raise KeyError(task_id)

    # -- session lifecycle

    def create_session(self, screening: ScreeningBody, covariates: dict[str, float] | None) -> SessionState:
        with self._lock:
            index = self._counter
            self._counter += 1
            sid = f"s-{index:06d}"
            eligible = screening.resident and screening.uses_delivery
            rng = np.random.default_rng(np.random.SeedSequence(entropy=self.seed, spawn_key=(index,)))
            if eligible:
                comp_idx = rng.choice(len(SBDC_COMPENSATION_LEVELS), size=SBDC_TASKS, replace=False)
                compensations = [float(SBDC_COMPENSATION_LEVELS[i]) for i in comp_idx]
                tasks = {}
                for sc in SCENARIOS:
                    picks = rng.choice(len(self.design.tasks), size=SCE_TASKS_PER_SCENARIO, replace=False)
                    tasks[sc] = [self.design.tasks[int(i)] for i in picks]
            else:
                compensations = []
                tasks = {sc: [] for sc in SCENARIOS}
            s = SessionState(
                session_id=sid,
                eligible=eligible,
                compensations=compensations,
                tasks=tasks,
                covariates=dict(covariates or {}),
                created_at=time.time(),
            )
            self.sessions[sid] = s
            self._order.append(sid)
            self._append_journal({"type": "session", "plan": _plan_payload(s), "covariates": s.covariates})
            return s

    # -- answers

    def submit_answer(self, sid: str, body: AnswerBody) -> tuple[int, dict]:
        with self._lock:
            s = self.sessions.get(sid)
            if s is None:
                return 404, {"error": f"unknown session {sid}"}
            if body.answer_id in s.answer_ids:
                return 200, {"status": "duplicate", "answer_id": body.answer_id}
            if body.dwell_ms < 0:
                return 422, {"error": "dwell_ms must be non-negative"}
            if body.kind == "sbdc":
                if not s.eligible or not (1 <= body.task_no <= SBDC_TASKS):
                    return 422, {"error": f"sbdc task {body.task_no} is outside the session plan"}
                if body.accepted is None:
                    return 422, {"error": "sbdc answer requires 'accepted'"}
                key = ("sbdc", body.task_no)
                payload = {
                    "answer_id": body.answer_id,
                    "accepted": bool(body.accepted),
                    "compensation": s.compensations[body.task_no - 1],
                    "dwell_ms": float(body.dwell_ms),
                    "received_at": time.time(),
                }
            else:
                if body.scenario is None or body.chosen_index is None:
                    return 422, {"error": "sce answer requires 'scenario' and 'chosen_index'"}
                if not s.eligible or not (1 <= body.task_no <= SCE_TASKS_PER_SCENARIO):
                    return 422, {"error": f"sce task {body.task_no} is outside the session plan"}
                task = s.tasks[body.scenario][body.task_no - 1]
                if not (0 <= body.chosen_index < task.n_alternatives):
                    return 422, {"error": f"chosen_index {body.chosen_index} out of range"}
                key = ("sce", body.scenario, body.task_no)
                payload = {
                    "answer_id": body.answer_id,
                    "chosen_index": int(body.chosen_index),
                    "task_id": task.task_id,
                    "dwell_ms": float(body.dwell_ms),
                    "received_at": time.time(),
                }
            if key in s.answers:
                return 409, {"error": "task already answered with a different answer_id"}
            s.answers[key] = payload
            s.answer_ids[body.answer_id] = key
            self._append_journal({"type": "answer", "session_id": sid, "key": list(key), "answer": payload})
            return 201, {"status": "stored", "answer_id": body.answer_id}

    # -- export

    def _completion_seconds(self, s: SessionState) -> float:
        return sum(a["dwell_ms"] for a in s.answers.values()) / 1000.0

    def _covariate_columns(self, sessions: list[SessionState]) -> list[str]:
        if not sessions:
            return []
        shared = set(sessions[0].covariates)
        for s in sessions[1:]:
            shared &= set(s.covariates)
        order: list[str] = []
        for s in sessions:
            for name in s.covariates:
                if name in shared and name not in order:
                    order.append(name)
        return order

    def export_csv(self, schema: str) -> str:
        with self._lock:
            sessions = [self.sessions[sid] for sid in self._order]
            buf = io.StringIO()
            w = csv.writer(buf)
            if schema == "sbdc":
                answered = [s for s in sessions if any(k[0] == "sbdc" for k in s.answers)]
                extras = self._covariate_columns(answered)
                w.writerow(
                    ["respondent_id", "task_no", "compensation_yuan", "accepted"]
                    + extras + [COMPLETION_SECONDS]
                )
                for s in answered:
                    comp_secs = self._completion_seconds(s)
                    for task_no in range(1, SBDC_TASKS + 1):
                        a = s.answers.get(("sbdc", task_no))
                        if a is None:
                            continue
                        w.writerow(
                            [s.session_id, task_no, _num(a["compensation"]), int(a["accepted"])]
                            + [_num(s.covariates[c]) for c in extras]
                            + [_num(round(comp_secs, 3))]
                        )
            elif schema == "sce":
                answered = [s for s in sessions if any(k[0] == "sce" for k in s.answers)]
                extras = self._covariate_columns(answered)
                w.writerow(
                    ["respondent_id", "scenario", "task_no", "alt_index",
                     "wait_min", "cost_yuan", "unrel_min", "chosen"]
                    + extras + [COMPLETION_SECONDS]
                )
                for s in answered:
                    comp_secs = self._completion_seconds(s)
                    for scenario in SCENARIOS:
                        for task_no in range(1, SCE_TASKS_PER_SCENARIO + 1):
                            a = s.answers.get(("sce", scenario, task_no))
                            if a is None:
                                continue
                            task = s.tasks[scenario][task_no - 1]
                            for j, alt in enumerate(task.alternatives):
                                w.writerow(
                                    [s.session_id, scenario, task_no, j,
                                     _num(alt.wait), _num(alt.cost), _num(alt.unrel),
                                     int(j == a["chosen_index"])]
                                    + [_num(s.covariates[c]) for c in extras]
                                    + [_num(round(comp_secs, 3))]
                                )
            else:
                raise ValueError(f"unknown schema {schema!r}")
            return buf.getvalue()


def _num(value):
    if isinstance(value, float) and value == int(value):
        return int(value)
    return value


def create_app(design: Design, seed: int = 0, journal_path: str | Path | None = None) -> FastAPI:
    """Build the collection service around a loaded design."""
    app = FastAPI(title="choiceval collection service")
    store = CollectionStore(design, seed=seed, journal_path=journal_path)
    app.state.store = store

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": "malformed body", "detail": exc.errors()})

    @app.get("/api/health")
    def health():
        return {"status": "ok", "sessions": len(store.sessions)}

    @app.post("/api/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        s = store.create_session(body.screening, body.covariates)
        return _plan_payload(s)

    @app.get("/api/sessions/{sid}")
    def get_session(sid: str):
        s = store.sessions.get(sid)
        if s is None:
            return JSONResponse(status_code=404, content={"error": f"unknown session {sid}"})
        payload = _plan_payload(s)
        payload["answered"] = sorted("/".join(str(p) for p in k) for k in s.answers)
        return payload

    @app.post("/api/sessions/{sid}/answers")
    def submit_answer(sid: str, body: AnswerBody):
        code, payload = store.submit_answer(sid, body)
        return JSONResponse(status_code=code, content=payload)

    @app.get("/api/export")
    def export(schema: str):
        if schema not in ("sbdc", "sce"):
            return JSONResponse(status_code=400, content={"error": f"schema must be sbdc or sce, got {schema!r}"})
        return PlainTextResponse(store.export_csv(schema), media_type="text/csv")

    return app
