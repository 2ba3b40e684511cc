"""One-route HTTP embedding service.

POST {"texts": ["..."]} returns {"embeddings": [[...], ...]} with one
unit-normalized vector per input text, in input order. This is the contract
the pipeline's `fetch_embeddings` client speaks.
"""

from __future__ import annotations

from fastapi import FastAPI
from pydantic import BaseModel

from .encoder import HashEncoder


class EmbedRequest(BaseModel):
    texts: list[str]


class EmbedResponse(BaseModel):
    embeddings: list[list[float]]


def create_app(model: HashEncoder) -> FastAPI:
    app = FastAPI(title="abstract embedding service")

    @app.post("/embed", response_model=EmbedResponse)
    def embed(request: EmbedRequest) -> EmbedResponse:
        if not request.texts:
            return EmbedResponse(embeddings=[])
        rows = model.encode_numpy(request.texts)
        return EmbedResponse(embeddings=[row.tolist() for row in rows])

    return app
