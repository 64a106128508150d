"""Command-line entry point: load the backbone and serve the protocol."""

from __future__ import annotations

import argparse
import sys

import uvicorn

from .app import DEFAULT_MAX_BATCH, DEFAULT_MODEL_ID, ServerConfig, create_app
from .encoder import BackboneError, load_encoder


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-server",
        description="Serve a 512-dim sentence-embedding model over the /embed protocol.",
    )
    parser.add_argument("--model", default=DEFAULT_MODEL_ID,
                        help="sentence-transformers model id")
    parser.add_argument("--port", type=int, default=8230)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--max-batch", type=int, default=DEFAULT_MAX_BATCH)
    parser.add_argument("--device", choices=("cpu", "accelerator"), default="cpu")
    return parser


def main(argv=None) -> None:
    args = build_parser().parse_args(argv)
    config = ServerConfig(
        model_id=args.model,
        port=args.port,
        max_batch=args.max_batch,
        device=args.device,
    )
    try:
        encoder = load_encoder(config.model_id, device=config.device)
    except BackboneError as exc:
        print(f"embed-server: startup failed: {exc}", file=sys.stderr)
        sys.exit(1)
    app = create_app(config, encoder)
    uvicorn.run(app, host=args.host, port=config.port, log_level="info")


if __name__ == "__main__":
    main()
