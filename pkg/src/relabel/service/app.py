"""HTTP review service: queue browsing, decision capture, merge.

All state lives in a QueueStore; the app is a thin JSON adapter over it.
Query-parameter problems return 400, unknown items 404, and semantically
invalid decisions (bad verdict, non-BIO tags) 422 with a message the UI can
show verbatim.
"""

from __future__ import annotations

import os
import time

from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from ..active_loop import (
    InvalidTags,
    ReviewDecision,
    UnknownUtterance,
    merge_reannotations,
)
from ..corpus import load_conll, save_conll
from ..errors import DataError
from .store import DONE, PENDING, QueueStore, ReviewItem, review_item_to_json


class DecisionBody(BaseModel):
    verdict: str
    annotator_id: str
    new_tags: list[str] | None = None
    timestamp: float | None = None


class MergeBody(BaseModel):
    output: str | None = None


def _summary(item: ReviewItem) -> dict:
    return {
        "utterance_id": item.utterance_id,
        "status": item.status,
        "max_gap": item.max_gap,
        "text": " ".join(item.tokens),
        "evidence_types": sorted({e.span.entity_type for e in item.evidence}),
    }


def create_app(
    store: QueueStore,
    corpus_path: str | None = None,
    static_dir: str | None = None,
) -> FastAPI:
    app = FastAPI(title="relabel review service")

    @app.get("/api/queue")
    def get_queue(
        status: str | None = None, page: str = "0", page_size: str = "50"
    ):
        if status not in (None, PENDING, DONE):
            raise HTTPException(400, f"status must be {PENDING!r} or {DONE!r}")
        try:
            page_index = int(page)
            size = int(page_size)
        except ValueError:
            raise HTTPException(400, "page and page_size must be integers")
        if page_index < 0:
            raise HTTPException(400, "page must be non-negative")
        if not 1 <= size <= 500:
            raise HTTPException(400, "page_size must be in 1..500")
        rows = store.items(status)
        window = rows[page_index * size:(page_index + 1) * size]
        return [_summary(item) for item in window]

    @app.get("/api/items/{utterance_id}")
    def get_item(utterance_id: str):
        try:
            return review_item_to_json(store.get(utterance_id))
        except UnknownUtterance as exc:
            raise HTTPException(404, str(exc))

    @app.post("/api/items/{utterance_id}/decision")
    def post_decision(utterance_id: str, body: DecisionBody):
        try:
            decision = ReviewDecision(
                utterance_id=utterance_id,
                verdict=body.verdict,
                annotator_id=body.annotator_id,
                timestamp=time.time() if body.timestamp is None else body.timestamp,
                new_tags=None if body.new_tags is None else tuple(body.new_tags),
            )
        except DataError as exc:
            raise HTTPException(422, str(exc))
        try:
            return review_item_to_json(store.record_decision(decision))
        except UnknownUtterance as exc:
            raise HTTPException(404, str(exc))
        except InvalidTags as exc:
            raise HTTPException(422, str(exc))

    @app.get("/api/tagset")
    def get_tagset():
        return {
            "entity_types": list(store.tag_set.entity_types),
            "labels": list(store.tag_set.labels),
        }

    @app.get("/api/stats")
    def get_stats():
        return store.stats()

    @app.post("/api/merge")
    def post_merge(body: MergeBody | None = None):
        if corpus_path is None or not os.path.exists(corpus_path):
            raise HTTPException(409, "no ingested corpus to merge into")
        corpus = load_conll(corpus_path, store.tag_set, mode="strict")
        try:
            merged = merge_reannotations(corpus, store.decision_log())
        except DataError as exc:
            raise HTTPException(422, str(exc))
        output = None if body is None else body.output
        if output is None:
            output = os.path.join(os.path.dirname(corpus_path), "merged.conll")
        save_conll(merged, output)
        counts = store.stats()
        return {
            "output": output,
            "utterances": len(merged),
            "decisions_applied": len(store.decision_log()),
            "corrected": counts["corrected"],
            "accepted": counts["accepted"],
        }

    if static_dir is not None and os.path.isdir(static_dir):
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
