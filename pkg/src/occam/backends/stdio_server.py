"""Child-process operator server: JSON lines on stdin/stdout.

Run as ``python3 -m occam.backends.stdio_server --world world.json`` (or with
``--fixture DIR``). Each request line is ``{"op": ..., ...}`` per the wire
format; each reply line is the op's reply object or ``{"error": msg}``.
"""

from __future__ import annotations

import argparse
import json
import sys

from .base import OperatorSuite, build_suite, OperatorEndpoint
from .dispatch import dispatch_request


def serve(suite: OperatorSuite, stdin=None, stdout=None) -> None:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
            op = request.pop("op")
            reply = dispatch_request(suite, op, request)
        except Exception as exc:  # reply line per request, never crash the loop
            reply = {"error": f"{type(exc).__name__}: {exc}"}
        stdout.write(json.dumps(reply, sort_keys=True) + "\n")
        stdout.flush()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--world", help="synthetic world description (world.json)")
    group.add_argument("--fixture", help="fixture directory to replay")
    args = parser.parse_args(argv)
    if args.world:
        endpoint = OperatorEndpoint(kind="synthetic", locator=args.world)
    else:
        endpoint = OperatorEndpoint(kind="fixture", locator=args.fixture)
    with build_suite(endpoint) as suite:
        serve(suite)
    return 0


if __name__ == "__main__":
    sys.exit(main())
