"""embed-server: a thin HTTP service exposing a sentence-embedding
backbone over the /embed wire protocol."""

from .app import DEFAULT_MODEL_ID, EXPECTED_DIM, ServerConfig, create_app
from .encoder import BackboneError, load_encoder

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_MODEL_ID",
    "EXPECTED_DIM",
    "ServerConfig",
    "create_app",
    "BackboneError",
    "load_encoder",
    "__version__",
]
