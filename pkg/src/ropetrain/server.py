"""HTTP API over the session manager, consumed by the training UI."""
from __future__ import annotations

from fastapi import FastAPI, HTTPException
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel

from .errors import SessionEnded, UnknownSession, UnknownTask
from .sessions import SessionManager


class TurnBody(BaseModel):
    document: list[str]


def create_app(manager: SessionManager) -> FastAPI:
    app = FastAPI(title="ropetrain")

    @app.get("/tasks")
    def list_tasks():
        return [
            {"id": task_id, "kind": kind.value, "title": title}
            for task_id, kind, title in manager.registry.list()
        ]

    @app.post("/tasks/{task_id}/sessions")
    def start_session(task_id: str):
        try:
            state = manager.start_session(task_id)
        except UnknownTask as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        return state.to_dict(manager.registry.get(state.task_id))

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        try:
            state = manager.get_session(session_id)
        except UnknownSession as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        return state.to_dict(manager.registry.get(state.task_id))

    @app.post("/sessions/{session_id}/turns")
    def post_turn(session_id: str, body: TurnBody):
        try:
            events, state = manager.post_turn(session_id, body.document)
        except UnknownSession as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        except SessionEnded as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        return {
            "events": [e.to_dict() for e in events],
            "state": state.to_dict(manager.registry.get(state.task_id)),
        }

    @app.post("/sessions/{session_id}/end")
    def end_session(session_id: str):
        try:
            report = manager.end_session(session_id)
        except UnknownSession as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        except SessionEnded as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        return report.to_dict()

    @app.get("/artifacts/{digest}", response_class=PlainTextResponse)
    def get_artifact(digest: str):
        try:
            return manager.find_artifact(digest)
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=f"no artifact {digest!r}") from exc

    return app
