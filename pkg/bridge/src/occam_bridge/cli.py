"""``occam-bridge`` command line: serve the operator endpoints.

Flags override config-file values, which override built-in defaults.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional

from .config import BridgeConfig
from .errors import BridgeError
from .server import BridgeServer


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="occam-bridge",
        description="Serve concept proposal, grounding, editing, "
                    "classification, and text embedding over HTTP.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    p_serve = sub.add_parser("serve", help="start the operator server")
    p_serve.add_argument("--config", help="JSON config file")
    p_serve.add_argument("--host")
    p_serve.add_argument("--port", type=int)
    p_serve.add_argument("--device")
    p_serve.add_argument("--record-dir", dest="record_dir",
                         help="save every reply as a replayable fixture here")
    p_serve.add_argument("--prompt-template", dest="prompt_template_path")
    p_serve.add_argument("--max-concepts", type=int, dest="max_concepts")
    return parser


def resolve_config(args: argparse.Namespace) -> BridgeConfig:
    base = (
        BridgeConfig.from_file(args.config).to_dict()
        if args.config
        else BridgeConfig().to_dict()
    )
    for key in ("host", "port", "device", "record_dir",
                "prompt_template_path", "max_concepts"):
        value = getattr(args, key, None)
        if value is not None:
            base[key] = value
    return BridgeConfig.from_dict(base)


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
        server = BridgeServer(config)
    except BridgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"serving {server.base_url}"
          + (f", recording to {config.record_dir}" if config.record_dir else ""),
          flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.stop()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
