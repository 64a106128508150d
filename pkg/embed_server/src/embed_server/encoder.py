"""Production encoder: a frozen multilingual sentence-embedding model.

Loaded lazily so the package imports (and its protocol tests run)
without the model weights present.
"""

from __future__ import annotations

from typing import Sequence

from .app import EXPECTED_DIM


class BackboneError(Exception):
    """The model could not be loaded or has the wrong dimensionality."""


def load_encoder(model_id: str, device: str = "cpu"):
    """Load the sentence-embedding backbone and return an encode
    callable. Refuses models whose output dimension is not 512, because
    the downstream trained projection depends on it."""
    try:
        from sentence_transformers import SentenceTransformer
    except ImportError as exc:
        raise BackboneError(f"sentence-transformers is not installed: {exc}") from exc
    torch_device = "cuda" if device == "accelerator" else "cpu"
    try:
        model = SentenceTransformer(model_id, device=torch_device)
    except Exception as exc:
        raise BackboneError(f"cannot load model {model_id!r}: {exc}") from exc
    dim = model.get_sentence_embedding_dimension()
    if dim != EXPECTED_DIM:
        raise BackboneError(
            f"model {model_id!r} produces {dim}-dimensional vectors; "
            f"the protocol requires {EXPECTED_DIM}"
        )

    def encode(texts: Sequence[str]) -> list[list[float]]:
        vectors = model.encode(
            list(texts), convert_to_numpy=True, show_progress_bar=False
        )
        return [vector.astype(float).tolist() for vector in vectors]

    return encode
