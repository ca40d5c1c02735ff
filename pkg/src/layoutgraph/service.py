"""HTTP session service for the interactive autocompletion loop.

Sessions live in memory with an append-only event log; replaying the log
reconstructs the GUI byte-identically, which is how undo works. Mutations
are serialized per session; an optional ``expected_version`` implements
optimistic concurrency (mismatch = 409). Previews never mutate state.
"""

from __future__ import annotations

import threading
import uuid
from typing import Literal, Optional

from fastapi import FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from .autocomplete import Autocompleter, accept
from .model import (
    BBox,
    Gui,
    ParseError,
    ValidationError,
    element_from_dict,
    element_to_dict,
    gui_from_dict,
    gui_to_dict,
)


class BBoxModel(BaseModel):
    x: int
    y: int
    w: int = Field(ge=1)
    h: int = Field(ge=1)

    def to_bbox(self) -> BBox:
        return BBox(self.x, self.y, self.w, self.h)


class CreateSessionRequest(BaseModel):
    gui: dict


class CreateSessionResponse(BaseModel):
    session_id: str
    version: int


class AddElementRequest(BaseModel):
    element: dict
    expected_version: Optional[int] = None


class PlaceRequest(BaseModel):
    element_id: str
    bbox: BBoxModel
    expected_version: Optional[int] = None


class UndoRequest(BaseModel):
    expected_version: Optional[int] = None


class SessionStateResponse(BaseModel):
    session_id: str
    gui: dict
    pool: list[str]
    history: list[dict]
    version: int


class SuggestionModel(BaseModel):
    element_id: str
    bbox: BBoxModel
    confidence: Literal["high", "medium", "low"]
    constraints: list[dict]
    trace: list[str]
    raw: dict
    cold_start: bool = False


class ModelInfoResponse(BaseModel):
    node_dim: int
    coord_dim: int
    gnn_layers: int
    type_vocab_size: int
    topics: list[str]
    task: Optional[str] = None
    train_seed: Optional[int] = None
    corpus_hash: Optional[str] = None


class Session:
    """One designer's working state; single writer, replayable history."""

    def __init__(self, session_id: str, gui: Gui):
        self.id = session_id
        self.gui = gui
        self.events: list[dict] = [{"index": 0, "type": "create", "gui": gui_to_dict(gui)}]
        self.lock = threading.Lock()

    @property
    def version(self) -> int:
        return len(self.events)

    def append(self, event: dict) -> None:
        event["index"] = len(self.events)
        self.events.append(event)


def replay(events: list[dict]) -> Gui:
    """Rebuild the GUI from the event log; undo cancels the latest place."""
    gui: Optional[Gui] = None
    place_stack: list[str] = []
    for ev in events:
        t = ev["type"]
        if t == "create":
            gui = gui_from_dict(ev["gui"])
        elif t == "add_element":
            gui = gui.add_element(element_from_dict(ev["element"]))
        elif t == "place":
            b = ev["bbox"]
            gui = accept(gui, ev["element_id"], BBox(b["x"], b["y"], b["w"], b["h"]))
            place_stack.append(ev["element_id"])
        elif t == "undo":
            eid = place_stack.pop()
            gui = gui.with_element(gui.element(eid).unplace())
        else:
            raise ValueError(f"unknown event type {t!r}")
    return gui


def _suggestion_model(s) -> SuggestionModel:
    d = s.to_dict()
    return SuggestionModel(
        element_id=d["element_id"], bbox=BBoxModel(**d["bbox"]),
        confidence=d["confidence"], constraints=d["constraints"],
        trace=d["trace"], raw=d["raw"], cold_start=d.get("cold_start", False))


def create_app(autocompleter: Autocompleter, cors_origins: list[str] | None = None) -> FastAPI:
    app = FastAPI(title="layoutgraph service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=cors_origins or ["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    sessions: dict[str, Session] = {}
    app.state.autocompleter = autocompleter
    app.state.sessions = sessions

    def get_session(session_id: str) -> Session:
        s = sessions.get(session_id)
        if s is None:
            raise HTTPException(404, f"unknown session {session_id!r}")
        return s

    def check_version(s: Session, expected: Optional[int]) -> None:
        if expected is not None and expected != s.version:
            raise HTTPException(
                409, f"version conflict: expected {expected}, session at {s.version}")

    def state_response(s: Session) -> SessionStateResponse:
        return SessionStateResponse(
            session_id=s.id, gui=gui_to_dict(s.gui),
            pool=[e.id for e in s.gui.unplaced],
            history=s.events, version=s.version)

    @app.post("/sessions", response_model=CreateSessionResponse, status_code=201)
    def create_session(req: CreateSessionRequest):
        try:
            gui = gui_from_dict(req.gui)
        except (ValidationError, ParseError) as exc:
            raise HTTPException(422, str(exc)) from exc
        sid = uuid.uuid4().hex
        sessions[sid] = Session(sid, gui)
        return CreateSessionResponse(session_id=sid, version=sessions[sid].version)

    @app.get("/sessions/{session_id}", response_model=SessionStateResponse)
    def get_state(session_id: str):
        return state_response(get_session(session_id))

    @app.post("/sessions/{session_id}/elements", response_model=SessionStateResponse)
    def add_element(session_id: str, req: AddElementRequest):
        s = get_session(session_id)
        with s.lock:
            check_version(s, req.expected_version)
            try:
                el = element_from_dict(req.element)
                if el.placed:
                    el = el.unplace()
                s.gui = s.gui.add_element(el)
            except (ValidationError, ParseError) as exc:
                raise HTTPException(422, str(exc)) from exc
            s.append({"type": "add_element", "element": element_to_dict(el)})
            return state_response(s)

    @app.get("/sessions/{session_id}/suggest", response_model=list[SuggestionModel])
    def suggest(session_id: str,
                mode: Literal["single", "group", "all"] = Query("single"),
                target: Optional[str] = Query(None)):
        s = get_session(session_id)
        ac: Autocompleter = app.state.autocompleter
        try:
            if mode == "single":
                if target is not None:
                    _require_element(s.gui, target)
                    return [_suggestion_model(ac.suggest(s.gui, target))]
                return [_suggestion_model(ac.suggest_one(s.gui))]
            if mode == "group":
                return [_suggestion_model(x) for x in ac.suggest_group(s.gui)]
            return [_suggestion_model(x) for x in ac.suggest_all(s.gui)]
        except ValidationError as exc:
            raise HTTPException(422, str(exc)) from exc

    @app.get("/sessions/{session_id}/preview", response_model=SuggestionModel)
    def preview(session_id: str, target: str = Query(...)):
        s = get_session(session_id)
        _require_element(s.gui, target)
        ac: Autocompleter = app.state.autocompleter
        try:
            return _suggestion_model(ac.suggest(s.gui, target))
        except ValidationError as exc:
            raise HTTPException(422, str(exc)) from exc

    @app.post("/sessions/{session_id}/place", response_model=SessionStateResponse)
    def place(session_id: str, req: PlaceRequest):
        s = get_session(session_id)
        with s.lock:
            check_version(s, req.expected_version)
            _require_element(s.gui, req.element_id)
            try:
                s.gui = accept(s.gui, req.element_id, req.bbox.to_bbox())
            except ValidationError as exc:
                raise HTTPException(422, str(exc)) from exc
            s.append({"type": "place", "element_id": req.element_id,
                      "bbox": req.bbox.model_dump()})
            return state_response(s)

    @app.post("/sessions/{session_id}/undo", response_model=SessionStateResponse)
    def undo(session_id: str, req: UndoRequest | None = None):
        s = get_session(session_id)
        with s.lock:
            check_version(s, req.expected_version if req else None)
            placed_events = sum(1 for e in s.events if e["type"] == "place")
            undone = sum(1 for e in s.events if e["type"] == "undo")
            if placed_events - undone <= 0:
                raise HTTPException(409, "nothing to undo")
            s.append({"type": "undo"})
            s.gui = replay(s.events)
            return state_response(s)

    @app.get("/model/info", response_model=ModelInfoResponse)
    def model_info():
        ac: Autocompleter = app.state.autocompleter
        cfg = ac.params.config
        meta = ac.params.meta
        return ModelInfoResponse(
            node_dim=cfg.embedding.node_dim, coord_dim=cfg.embedding.coord_dim,
            gnn_layers=cfg.gnn_layers, type_vocab_size=len(cfg.embedding.type_vocab),
            topics=list(cfg.topics), task=meta.get("task"),
            train_seed=meta.get("train_seed"), corpus_hash=meta.get("corpus_hash"))

    def _require_element(gui: Gui, element_id: str) -> None:
        try:
            gui.element(element_id)
        except KeyError as exc:
            raise HTTPException(404, f"unknown element {element_id!r}") from exc

    return app
