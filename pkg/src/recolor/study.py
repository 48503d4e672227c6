"""Blind perceptual-study backend: pools, sessions, judgments, HTTP API.

Participants see one image at a time, drawn without replacement from a
pool whose method labels stay server-side: no payload addressed to a
participant ever carries a method id. Judgments append to a durable
JSONL store; aggregation joins them back to the hidden labels.
"""

from __future__ import annotations

import json
import random
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from pydantic import BaseModel

from .errors import (
    ConfigError,
    ProtocolError,
    SessionNotFoundError,
    UndefinedStatisticError,
)
from .evaluation import Judgment, naturalness

STORE_VERSION = 1
API_VERSION = 1
DEFAULT_SESSION_SIZE = 50

_MEDIA_TYPES = {".png": "image/png", ".jpg": "image/jpeg", ".jpeg": "image/jpeg"}


@dataclass(frozen=True)
class PoolEntry:
    image_id: str
    method_id: str
    path: Path


class StudyPool:
    """The candidate images, keyed by opaque image id."""

    def __init__(self, entries: list[PoolEntry]):
        ids = [e.image_id for e in entries]
        if len(set(ids)) != len(ids):
            raise ConfigError("pool image_ids must be unique")
        for entry in entries:
            if not entry.path.is_file():
                raise ConfigError(f"pool path not readable: {entry.path}")
        self.entries = list(entries)
        self._by_id = {e.image_id: e for e in entries}

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, image_id: str) -> PoolEntry:
        return self._by_id[image_id]

    def image_ids(self) -> list[str]:
        return [e.image_id for e in self.entries]

    @classmethod
    def from_manifest(cls, path) -> "StudyPool":
        """Parse a manifest of tab-separated (image_id, method_id, path) rows.

        Blank lines and ``#`` comments are skipped; relative paths resolve
        against the manifest's directory.
        """
        path = Path(path)
        entries = []
        for lineno, line in enumerate(path.read_text().splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            cells = line.split("\t")
            if len(cells) != 3:
                raise ConfigError(f"{path}:{lineno}: expected 3 tab-separated fields")
            image_id, method_id, raw = cells
            p = Path(raw)
            entries.append(
                PoolEntry(image_id, method_id, p if p.is_absolute() else path.parent / p)
            )
        return cls(entries)


@dataclass
class StudySession:
    session_id: str
    image_ids: list[str]
    cursor: int = 0
    judged: set = field(default_factory=set)

    @property
    def size(self) -> int:
        return len(self.image_ids)

    @property
    def complete(self) -> bool:
        return self.cursor >= self.size

    def current_image_id(self) -> str:
        if self.complete:
            raise ProtocolError(f"session {self.session_id} is complete")
        return self.image_ids[self.cursor]


def create_session(pool: StudyPool, k: int = DEFAULT_SESSION_SIZE, seed=None) -> StudySession:
    """Draw ``k`` distinct pool images uniformly without replacement."""
    if k < 1 or k > len(pool):
        raise ConfigError(f"session size {k} must be in [1, {len(pool)}]")
    rng = random.Random(seed)
    session_id = uuid.UUID(bytes=rng.randbytes(16), version=4).hex
    return StudySession(session_id=session_id, image_ids=rng.sample(pool.image_ids(), k))


class JudgmentStore:
    """Append-only JSONL record of judgments, keyed by (session, image)."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.touch(exist_ok=True)
        self._lock = threading.Lock()

    def append(self, session_id: str, image_id: str, realistic) -> None:
        record = {
            "v": STORE_VERSION,
            "session_id": session_id,
            "image_id": image_id,
            "realistic": realistic,  # None marks a timed-out skip
        }
        line = json.dumps(record, sort_keys=True)
        with self._lock, self.path.open("a") as fh:
            fh.write(line + "\n")
            fh.flush()

    def records(self) -> list[dict]:
        out = []
        for line in self.path.read_text().splitlines():
            if line.strip():
                out.append(json.loads(line))
        return out


class SessionManager:
    """Serializes per-session state transitions over a shared store."""

    def __init__(self, pool: StudyPool, store: JudgmentStore, k: int = DEFAULT_SESSION_SIZE,
                 seed=None, time_limit_ms=None):
        self.pool = pool
        self.store = store
        self.k = k
        self.time_limit_ms = time_limit_ms
        self.sessions: dict[str, StudySession] = {}
        self._rng = random.Random(seed)
        self._lock = threading.Lock()

    def start(self) -> StudySession:
        with self._lock:
            session = create_session(self.pool, self.k, seed=self._rng.randrange(2**63))
            self.sessions[session.session_id] = session
            return session

    def get(self, session_id: str) -> StudySession:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise SessionNotFoundError(f"unknown session '{session_id}'") from None

    def record_judgment(self, session_id: str, image_id: str, realistic) -> StudySession:
        """Accept a judgment (or a skip, ``realistic=None``) for the current item."""
        session = self.get(session_id)
        with self._lock:
            if image_id in session.judged:
                raise ProtocolError(f"duplicate judgment for image '{image_id}'")
            expected = session.current_image_id()
            if image_id != expected:
                raise ProtocolError(
                    f"out-of-order judgment: expected image '{expected}', got '{image_id}'"
                )
            self.store.append(session_id, image_id, realistic)
            session.judged.add(image_id)
            session.cursor += 1
        return session


def session_results(pool: StudyPool, store: JudgmentStore) -> list[dict]:
    """Join stored judgments to hidden method labels; one row per method.

    Skipped items count as abandonment, not as judgments.
    """
    records = store.records()
    if not records:
        raise UndefinedStatisticError("judgment store is empty")
    judgments = []
    skipped: dict[str, int] = {}
    for rec in records:
        method = pool[rec["image_id"]].method_id
        if rec["realistic"] is None:
            skipped[method] = skipped.get(method, 0) + 1
            continue
        judgments.append(
            Judgment(
                image_id=rec["image_id"],
                method_id=method,
                realistic=bool(rec["realistic"]),
                participant_id=rec["session_id"],
            )
        )
    methods = sorted({j.method_id for j in judgments} | set(skipped))
    rows = []
    for method in methods:
        judged = [j for j in judgments if j.method_id == method]
        rows.append(
            {
                "method_id": method,
                "judged": len(judged),
                "naturalness_pct": naturalness(judgments, method) if judged else None,
                "skipped": skipped.get(method, 0),
            }
        )
    return rows


def results_to_tsv(rows: list[dict]) -> str:
    lines = ["method_id\tjudged\tnaturalness_pct\tskipped"]
    for row in rows:
        pct = "" if row["naturalness_pct"] is None else f"{row['naturalness_pct']:.4f}"
        lines.append(f"{row['method_id']}\t{row['judged']}\t{pct}\t{row['skipped']}")
    return "\n".join(lines) + "\n"


class JudgmentIn(BaseModel):
    """Judgment request body; ``realistic=null`` marks a timed-out skip."""

    v: int = API_VERSION
    image_id: str
    realistic: Optional[bool] = None


def build_app(manager: SessionManager):
    """FastAPI app exposing the participant and operator endpoints.

    Participant payloads (session create/current, image bytes) carry no
    method labels; ``/api/v1/results`` is the operator surface.
    """
    from fastapi import FastAPI, HTTPException
    from fastapi.responses import Response

    app = FastAPI(title="perceptual study backend")

    def session_payload(session: StudySession) -> dict:
        payload = {
            "v": API_VERSION,
            "session_id": session.session_id,
            "k": session.size,
            "cursor": session.cursor,
            "complete": session.complete,
        }
        if manager.time_limit_ms is not None:
            payload["time_limit_ms"] = manager.time_limit_ms
        if not session.complete:
            payload["image_id"] = session.current_image_id()
        return payload

    @app.post("/api/v1/sessions")
    def start_session():
        return session_payload(manager.start())

    @app.get("/api/v1/sessions/{session_id}/current")
    def current(session_id: str):
        try:
            return session_payload(manager.get(session_id))
        except SessionNotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc

    @app.post("/api/v1/sessions/{session_id}/judgments")
    def judge(session_id: str, judgment: JudgmentIn):
        try:
            session = manager.record_judgment(
                session_id, judgment.image_id, judgment.realistic
            )
        except SessionNotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        except ProtocolError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        return session_payload(session)

    @app.get("/api/v1/images/{image_id}")
    def image_bytes(image_id: str):
        try:
            entry = manager.pool[image_id]
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown image") from None
        media = _MEDIA_TYPES.get(entry.path.suffix.lower(), "application/octet-stream")
        return Response(content=entry.path.read_bytes(), media_type=media)

    @app.get("/api/v1/results")
    def results():
        try:
            rows = session_results(manager.pool, manager.store)
        except UndefinedStatisticError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        return {"v": API_VERSION, "methods": rows}

    return app
