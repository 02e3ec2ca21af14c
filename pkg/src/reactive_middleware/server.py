"""`rmserve`: stand up the HTTP service over a deployment.

With --data-dir pointing at a previous run, the deployment restores from
the persisted log and config; otherwise it starts fresh from --config.
"""

from __future__ import annotations

import argparse
import json
import os
import socket
import sys

import uvicorn

from .api_service import create_app
from .clock import VirtualClock
from .deployment import open_deployment
from .errors import MiddlewareError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rmserve",
                                     description="Serve the change-management middleware over HTTP.")
    parser.add_argument("--config", help="JSON configuration document for a fresh deployment")
    parser.add_argument("--data-dir", default=os.environ.get("RM_DATA_DIR"),
                        help="persistence directory; restores if it already holds state")
    parser.add_argument("--host", default=os.environ.get("RM_HOST", "127.0.0.1"))
    parser.add_argument("--port", type=int, default=int(os.environ.get("RM_PORT", "8787")))
    parser.add_argument("--virtual-clock", action="store_true",
                        help="run on a deterministic virtual clock (advance via the admin endpoint)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = None
    if args.config:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                config = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"cannot read config: {exc}", file=sys.stderr)
            return 2
    clock = VirtualClock() if args.virtual_clock else None
    try:
        dep = open_deployment(args.data_dir, config=config, clock=clock)
    except MiddlewareError as exc:
        print(json.dumps(exc.to_envelope()), file=sys.stderr)
        return 2

    # fail fast with a clear message instead of uvicorn's traceback
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((args.host, args.port))
    except OSError as exc:
        print(f"cannot bind {args.host}:{args.port}: {exc.strerror}", file=sys.stderr)
        return 3
    finally:
        probe.close()

    uvicorn.run(create_app(dep), host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    sys.exit(main())
