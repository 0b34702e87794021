"""HTTP surface for rater sessions.

Thin wrapper over the study engine: no domain logic lives here. Rater-facing
responses never include provenance, file paths, or model identifiers; the
aggregate results endpoint is operator-facing and is refused until the
session completes unless explicitly asked for partial numbers.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import Depends, FastAPI, HTTPException, Request, Response
from pydantic import BaseModel, Field

from .errors import StudyError
from .study import (
    DuplicateRatingError,
    SessionStore,
    StudySession,
    UnknownTokenError,
    agreement_rows,
    load_session,
    perceptual_summary,
)


class RatingSubmission(BaseModel):
    realism: int = Field(ge=1, le=4)
    judged_real: bool


def create_app(
    store: SessionStore,
    second_session: StudySession | None = None,
    auth_token: str | None = None,
    ui_dir: str | None = None,
) -> FastAPI:
    app = FastAPI(title="perceptual study service", docs_url=None, redoc_url=None)

    def check_auth(request: Request) -> None:
        if auth_token is None:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {auth_token}":
            raise HTTPException(status_code=401, detail="missing or invalid bearer token")

    @app.get("/api/session", dependencies=[Depends(check_auth)])
    def get_session():
        s = store.session
        return {"session_id": s.session_id, "total": s.total, "completed": s.completed}

    @app.get("/api/item/next", dependencies=[Depends(check_auth)])
    def get_next_item():
        nxt = store.session.next_unrated()
        if nxt is None:
            return {"done": True}
        index, item = nxt
        return {"token": item.token, "index": index, "total": store.session.total}

    @app.get("/api/image/{token}", dependencies=[Depends(check_auth)])
    def get_image(token: str):
        try:
            item = store.session.item_by_token(token)
        except UnknownTokenError:
            raise HTTPException(status_code=404, detail="unknown token") from None
        data = Path(item.image_path).read_bytes()
        return Response(content=data, media_type="image/png")

    @app.post("/api/item/{token}/rating", status_code=204, dependencies=[Depends(check_auth)])
    def post_rating(token: str, submission: RatingSubmission):
        try:
            store.record_rating(token, submission.realism, submission.judged_real)
        except UnknownTokenError:
            raise HTTPException(status_code=404, detail="unknown token") from None
        except DuplicateRatingError:
            raise HTTPException(status_code=409, detail="already rated") from None
        return Response(status_code=204)

    @app.get("/api/results", dependencies=[Depends(check_auth)])
    def get_results(partial: bool = False):
        session = store.session
        if not session.is_complete and not partial:
            raise HTTPException(
                status_code=409,
                detail="session incomplete; pass partial=true to peek anyway",
            )
        sessions = [session] + ([second_session] if second_session else [])
        try:
            ratings = [vars(r) for s in sessions for r in perceptual_summary(s)]
        except StudyError:
            ratings = []
        agreement = [vars(r) for s in sessions for r in agreement_rows(s)]
        return {
            "total": session.total,
            "completed": session.completed,
            "partial": not session.is_complete,
            "ratings": ratings,
            "agreement": agreement,
        }

    if ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


def build_service(
    session_dir,
    second_dir=None,
    auth_token: str | None = None,
    ui_dir: str | None = None,
) -> FastAPI:
    """Assemble the app for a stored session (plus an optional second rater)."""
    store = SessionStore(session_dir)
    second = load_session(second_dir) if second_dir else None
    return create_app(store, second_session=second, auth_token=auth_token, ui_dir=ui_dir)
