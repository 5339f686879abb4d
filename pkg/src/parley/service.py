"""HTTP service wrapping the evaluation harness.

State is an append-only newline-delimited JSON event log; replaying the
log reconstructs every session exactly (bot replies are stored in the
log, so replay never re-runs a model). Endpoints are synchronous JSON.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import asdict
from typing import Dict, List, Optional, Tuple

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import metrics
from .decoding import DecodingConfig
from .harness import (
    MAX_TURNS,
    BotInterface,
    GenericBot,
    LmBot,
    ProtocolError,
    SessionRecord,
    new_session,
    session_step,
)
from .repetition import RepetitionConfig


class NotFoundError(Exception):
    def __init__(self, detail: str):
        self.detail = detail
        super().__init__(detail)


class EventLog:
    """Single-writer append-only JSONL log."""

    def __init__(self, path: str):
        self.path = path
        self._seq = 0
        self._lock = threading.Lock()

    def replay(self) -> List[Dict]:
        events = []
        try:
            with open(self.path, "r", encoding="utf-8") as f:
                for line in f:
                    if line.strip():
                        events.append(json.loads(line))
        except FileNotFoundError:
            return []
        if events:
            self._seq = events[-1]["seq"]
        return events

    def append(self, session_id: str, event: Dict) -> Dict:
        with self._lock:
            self._seq += 1
            record = {
                "seq": self._seq,
                "session_id": session_id,
                "ts": time.time(),
                "event": event,
            }
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(json.dumps(record) + "\n")
        return record


class SessionStore:
    """In-memory session states rebuilt from (and kept in sync with) the log."""

    def __init__(self, log: EventLog):
        self.log = log
        self.sessions: Dict[str, SessionRecord] = {}
        self.lock = threading.Lock()
        for rec in log.replay():
            self._apply(rec["session_id"], rec["event"])

    def _apply(self, session_id: str, event: Dict) -> None:
        if event["type"] == "create":
            self.sessions[session_id] = new_session(session_id, event.get("config"))
        else:
            session_step(self.sessions[session_id], event)

    def create(self, config: Dict) -> SessionRecord:
        session_id = uuid.uuid4().hex
        with self.lock:
            self._apply(session_id, {"type": "create", "config": config})
            self.log.append(session_id, {"type": "create", "config": config})
        return self.sessions[session_id]

    def get(self, session_id: str) -> SessionRecord:
        rec = self.sessions.get(session_id)
        if rec is None:
            raise NotFoundError(f"no session {session_id!r}")
        return rec

    def step(self, session_id: str, event: Dict) -> SessionRecord:
        with self.lock:
            rec = self.get(session_id)
            session_step(rec, event)
            self.log.append(session_id, event)
        return rec


def build_bot(config: Dict, models: Dict[str, object]) -> BotInterface:
    name = config.get("model", "generic")
    if name == "generic":
        return GenericBot()
    if name not in models:
        raise NotFoundError(f"no model {name!r}")
    decoding = DecodingConfig(
        temperature=config.get("temperature", 1.0),
        top_k=config.get("top_k"),
        num_samples=config.get("num_samples", 20),
        max_response_tokens=config.get("max_response_tokens", 32),
        rng_seed=config.get("seed", 0),
    )
    return LmBot(models[name], decoding=decoding, repetition=RepetitionConfig())


class CreateSessionRequest(BaseModel):
    model: str = "generic"
    seed: int = 0
    temperature: float = 1.0
    top_k: Optional[int] = None
    num_samples: int = 20
    max_response_tokens: int = 32
    perplexity: Optional[float] = None


class TurnRequest(BaseModel):
    text: str
    include_diagnostics: bool = False


class LabelRequest(BaseModel):
    turn_index: int
    worker: str
    sensible: bool
    specific: bool


def _session_view(rec: SessionRecord) -> Dict:
    return {
        "session_id": rec.session_id,
        "config": rec.config,
        "status": rec.status,
        "turns": [{"speaker": sp, "text": tx} for sp, tx in rec.turns],
        "labels": {
            str(i): {w: {"sensible": s, "specific": p} for w, (s, p) in workers.items()}
            for i, workers in sorted(rec.labels.items())
        },
    }


def _config_key(config: Dict) -> str:
    return json.dumps(config, sort_keys=True)


def compute_summary(sessions: Dict[str, SessionRecord], with_regression: bool) -> Dict:
    complete = [rec for rec in sessions.values() if rec.status == "complete"]
    if not complete:
        return {"code": "not_enough_data", "reason": "no complete sessions", "configs": []}
    groups: Dict[str, List[SessionRecord]] = {}
    for rec in complete:
        groups.setdefault(_config_key(rec.config), []).append(rec)
    configs = []
    for key in sorted(groups):
        turns: List[metrics.TurnLabels] = []
        for rec in sorted(groups[key], key=lambda r: r.session_id):
            for idx in sorted(rec.labels):
                workers = sorted(rec.labels[idx])
                turns.append(
                    metrics.TurnLabels(
                        sensible=tuple(rec.labels[idx][w][0] for w in workers),
                        specific=tuple(rec.labels[idx][w][1] for w in workers),
                    )
                )
        result = metrics.aggregate(turns)
        cfg = json.loads(key)
        configs.append(
            {
                "config": cfg,
                "n_sessions": len(groups[key]),
                "n_turns": result.n_turns,
                "sensibleness": result.sensibleness,
                "specificity": result.specificity,
                "ssa": result.ssa,
                "perplexity": cfg.get("perplexity"),
            }
        )
    payload: Dict = {"configs": configs, "regression": None}
    if with_regression:
        points = [
            (c["perplexity"], c["ssa"]) for c in configs if c["perplexity"] is not None
        ]
        xs = [p for p, _ in points]
        if len(points) >= 2 and len(set(xs)) >= 2:
            try:
                fit = metrics.fit_line(xs, [s for _, s in points])
                payload["regression"] = asdict(fit)
            except ValueError as exc:
                payload["regression"] = {"code": "not_enough_data", "reason": str(exc)}
        else:
            payload["regression"] = {
                "code": "not_enough_data",
                "reason": "need >= 2 configs with distinct perplexities",
            }
    return payload


def create_app(store_path: str, models: Optional[Dict[str, object]] = None) -> FastAPI:
    """App factory; `models` maps model names to LmInterface instances."""
    app = FastAPI(title="parley evaluation service")
    store = SessionStore(EventLog(store_path))
    models = models or {}
    app.state.store = store
    app.state.models = models

    @app.exception_handler(ProtocolError)
    async def protocol_error(request: Request, exc: ProtocolError):
        return JSONResponse(
            status_code=409,
            content={"code": exc.code, "reason": "protocol violation", "detail": exc.detail},
        )

    @app.exception_handler(NotFoundError)
    async def not_found(request: Request, exc: NotFoundError):
        return JSONResponse(
            status_code=404,
            content={"code": "not_found", "reason": "unknown resource", "detail": exc.detail},
        )

    @app.post("/sessions")
    def create_session(req: CreateSessionRequest):
        config = req.model_dump(exclude_none=True)
        build_bot(config, models)  # 404 before anything is persisted
        rec = store.create(config)
        return {
            "session_id": rec.session_id,
            "opener": {"speaker": "bot", "text": rec.turns[0][1]},
        }

    @app.post("/sessions/{session_id}/turns")
    def post_turn(session_id: str, req: TurnRequest):
        with store.lock:
            rec = store.get(session_id)
            bot = build_bot(rec.config, models)
            session_step(rec, {"type": "user_turn", "text": req.text})
            store.log.append(session_id, {"type": "user_turn", "text": req.text})
            if len(rec.turns) >= MAX_TURNS:
                return {"bot_turn": None, "detail": "turn limit reached; finish the session"}
            history = [tx for _, tx in rec.turns]
            diagnostics = None
            if isinstance(bot, LmBot):
                text, diag = bot.reply_with_diagnostics(history)
                if req.include_diagnostics:
                    diagnostics = {
                        "seed": diag.seed,
                        "candidates": [
                            {"text": t, "score": s, "logprob_sum": lp, "token_count": n}
                            for t, s, lp, n in diag.candidates
                        ],
                        "removals": diag.outcome.removals,
                        "forced": diag.outcome.forced,
                    }
            else:
                text = bot.reply(history)
            session_step(rec, {"type": "bot_turn", "text": text})
            store.log.append(session_id, {"type": "bot_turn", "text": text})
        return {
            "bot_turn": {"speaker": "bot", "text": text, "turn_index": len(rec.turns) - 1},
            "diagnostics": diagnostics,
        }

    @app.post("/sessions/{session_id}/labels")
    def post_label(session_id: str, req: LabelRequest):
        store.step(
            session_id,
            {
                "type": "label",
                "turn_index": req.turn_index,
                "worker": req.worker,
                "sensible": req.sensible,
                "specific": req.specific,
            },
        )
        return {"ok": True}

    @app.post("/sessions/{session_id}/finish")
    def finish(session_id: str):
        rec = store.step(session_id, {"type": "finish"})
        return {"session_id": session_id, "status": rec.status}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return _session_view(store.get(session_id))

    @app.get("/models")
    def list_models():
        return {"models": ["generic"] + sorted(models)}

    @app.get("/summary")
    def summary(regression: bool = True):
        return compute_summary(store.sessions, regression)

    return app
