"""The /embed wire protocol as a FastAPI application.

Contract (shared with the consuming CLI's remote backend):

    POST /embed  {"texts": [str, ...]}
        -> 200 {"model": str, "dim": 512, "vectors": [[512 floats], ...]}
        -> 400 empty text list or malformed body
        -> 413 more than max_batch texts
        -> 500 {"error": str} on encoder failure
    GET /health  -> {"status": "ok", "model": str, "dim": 512}

The encoder is injected as a plain callable so tests can run without
model weights; production wiring lives in ``encoder.py``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from fastapi import FastAPI
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

EXPECTED_DIM = 512
DEFAULT_MODEL_ID = "distiluse-base-multilingual-cased-v2"
DEFAULT_MAX_BATCH = 256

# texts -> one vector (list of floats) per text, order preserved
Encoder = Callable[[Sequence[str]], list[list[float]]]


@dataclass(frozen=True)
class ServerConfig:
    model_id: str = DEFAULT_MODEL_ID
    port: int = 8230
    max_batch: int = DEFAULT_MAX_BATCH
    device: str = "cpu"  # "cpu" or "accelerator"

    def __post_init__(self):
        if self.max_batch < 1:
            raise ValueError("max_batch must be positive")
        if self.device not in ("cpu", "accelerator"):
            raise ValueError("device must be 'cpu' or 'accelerator'")


class EmbedRequest(BaseModel):
    texts: list[str]


def create_app(config: ServerConfig, encoder: Encoder) -> FastAPI:
    app = FastAPI(title="embed-server", docs_url=None, redoc_url=None)

    @app.exception_handler(RequestValidationError)
    async def malformed_request(_request, exc):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.get("/health")
    def health():
        return {"status": "ok", "model": config.model_id, "dim": EXPECTED_DIM}

    @app.post("/embed")
    def embed(request: EmbedRequest):
        if not request.texts:
            return JSONResponse(
                status_code=400, content={"error": "texts must be non-empty"}
            )
        if len(request.texts) > config.max_batch:
            return JSONResponse(
                status_code=413,
                content={
                    "error": f"at most {config.max_batch} texts per request"
                },
            )
        try:
            vectors = encoder(request.texts)
            if len(vectors) != len(request.texts) or any(
                len(v) != EXPECTED_DIM for v in vectors
            ):
                raise RuntimeError("encoder returned a malformed batch")
        except Exception as exc:
            return JSONResponse(status_code=500, content={"error": str(exc)})
        return {"model": config.model_id, "dim": EXPECTED_DIM, "vectors": vectors}

    return app
