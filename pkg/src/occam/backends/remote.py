"""HTTP and child-process operator clients, plus an in-process HTTP server.

Both clients speak the same wire format (see ``dispatch``) and share reply
validation: transport faults raise TransportError and are retried with
exponential backoff; malformed or invalid replies raise ProtocolError and
are never retried.
"""

from __future__ import annotations

import json
import queue
import shlex
import subprocess
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Mapping, Optional

import numpy as np
import requests

from ..errors import GroundingFailure, ProtocolError, TransportError
from ..types import BinaryMask, ConceptLabel, ImageRecord, ScoreVector
from .base import OperatorSuite, call_with_retries
from .dispatch import dispatch_request, mask_from_b64, mask_to_b64, pixels_from_b64, pixels_to_b64


class _WireClient(OperatorSuite):
    """Shared request construction and reply validation over an abstract
    ``_call(op, body) -> reply dict``."""

    def _call(self, op: str, body: dict) -> dict:  # pragma: no cover - abstract
        raise NotImplementedError

    def propose_concepts(self, image: ImageRecord) -> list[str]:
        doc = self._call(
            "propose",
            {"image_id": image.image_id, "image_png_b64": pixels_to_b64(image.pixels)},
        )
        concepts = doc.get("concepts")
        if not isinstance(concepts, list) or not all(isinstance(c, str) for c in concepts):
            raise ProtocolError(f"propose reply must carry a string list, got {doc!r}")
        return list(concepts)

    def ground_concept(self, image: ImageRecord, concept: ConceptLabel) -> BinaryMask:
        doc = self._call(
            "ground",
            {
                "image_id": image.image_id,
                "image_png_b64": pixels_to_b64(image.pixels),
                "concept": concept.normalized_text,
            },
        )
        if doc.get("failure"):
            raise GroundingFailure(f"backend could not ground {concept.normalized_text!r}")
        if "mask_png_b64" not in doc:
            raise ProtocolError(f"ground reply carries neither mask nor failure: {doc!r}")
        try:
            mask = mask_from_b64(doc["mask_png_b64"])
        except Exception as exc:
            raise ProtocolError(f"undecodable mask in ground reply: {exc}") from exc
        if mask.positive_count == 0:
            raise GroundingFailure(
                f"backend returned an empty mask for {concept.normalized_text!r}"
            )
        return mask

    def remove_region(self, image: ImageRecord, mask: BinaryMask) -> np.ndarray:
        if mask.positive_count == 0:
            raise ValueError("refusing to edit with an empty mask")
        doc = self._call(
            "edit",
            {
                "image_id": image.image_id,
                "image_png_b64": pixels_to_b64(image.pixels),
                "mask_png_b64": mask_to_b64(mask),
            },
        )
        if "image_png_b64" not in doc:
            raise ProtocolError(f"edit reply carries no image: {doc!r}")
        try:
            return pixels_from_b64(doc["image_png_b64"])
        except Exception as exc:
            raise ProtocolError(f"undecodable image in edit reply: {exc}") from exc

    def classify(self, image: ImageRecord) -> ScoreVector:
        doc = self._call(
            "classify",
            {"image_id": image.image_id, "image_png_b64": pixels_to_b64(image.pixels)},
        )
        try:
            return ScoreVector(
                scores=np.asarray(doc["scores"], dtype=np.float64),
                class_names=tuple(str(c) for c in doc["class_names"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"invalid classify reply: {exc}") from exc

    def embed_text(self, text: str) -> np.ndarray:
        if not str(text):
            raise ValueError("cannot embed empty text")
        doc = self._call("embed", {"text": str(text)})
        try:
            values = np.asarray(doc["values"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"invalid embed reply: {exc}") from exc
        if values.ndim != 1 or values.size < 2 or not np.isfinite(values).all():
            raise ProtocolError("embed reply must be a finite vector of dimension >= 2")
        return values


class HttpSuite(_WireClient):
    """POSTs JSON bodies to ``<base_url>/<op>``."""

    def __init__(
        self,
        base_url: str,
        timeout: float = 30.0,
        max_retries: int = 2,
        options: Optional[Mapping[str, object]] = None,
    ):
        options = options or {}
        self.base_url = base_url.rstrip("/")
        self.timeout = float(timeout)
        self.max_retries = int(max_retries)
        self.retry_base_delay = float(options.get("retry_base_delay", 0.05))
        limit = int(options.get("max_concurrency", 0))
        self._gate = threading.BoundedSemaphore(limit) if limit > 0 else None
        self._session = requests.Session()

    def _post_once(self, op: str, body: dict) -> dict:
        try:
            if self._gate is not None:
                with self._gate:
                    resp = self._session.post(
                        f"{self.base_url}/{op}", json=body, timeout=self.timeout
                    )
            else:
                resp = self._session.post(
                    f"{self.base_url}/{op}", json=body, timeout=self.timeout
                )
        except (requests.Timeout, requests.ConnectionError) as exc:
            raise TransportError(f"{op}: {exc}") from exc
        if resp.status_code >= 500:
            raise TransportError(f"{op}: server error {resp.status_code}")
        if resp.status_code != 200:
            raise ProtocolError(f"{op}: HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            doc = resp.json()
        except ValueError as exc:
            raise ProtocolError(f"{op}: reply is not JSON") from exc
        if not isinstance(doc, dict):
            raise ProtocolError(f"{op}: reply is not an object")
        return doc

    def _call(self, op: str, body: dict) -> dict:
        return call_with_retries(
            lambda: self._post_once(op, body), self.max_retries, self.retry_base_delay
        )

    def close(self) -> None:
        self._session.close()


class SubprocessSuite(_WireClient):
    """Talks JSON lines to a child process spawned from a command string.
    The child is (re)spawned lazily, and killed on transport faults so a
    retry starts from a fresh process."""

    def __init__(
        self,
        command: str,
        timeout: float = 30.0,
        max_retries: int = 2,
        options: Optional[Mapping[str, object]] = None,
    ):
        options = options or {}
        self.argv = shlex.split(command)
        if not self.argv:
            raise ValueError("empty command")
        self.timeout = float(timeout)
        self.max_retries = int(max_retries)
        self.retry_base_delay = float(options.get("retry_base_delay", 0.05))
        self._lock = threading.Lock()
        self._proc: Optional[subprocess.Popen] = None
        self._replies: "queue.Queue[Optional[str]]" = queue.Queue()

    def _spawn(self) -> None:
        self._proc = subprocess.Popen(
            self.argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        self._replies = queue.Queue()
        thread = threading.Thread(
            target=self._pump, args=(self._proc, self._replies), daemon=True
        )
        thread.start()

    @staticmethod
    def _pump(proc: subprocess.Popen, replies: "queue.Queue[Optional[str]]") -> None:
        assert proc.stdout is not None
        for line in proc.stdout:
            replies.put(line)
        replies.put(None)  # EOF sentinel

    def _kill(self) -> None:
        if self._proc is not None:
            try:
                self._proc.kill()
                self._proc.wait(timeout=5)
            except Exception:
                pass
            self._proc = None

    def _exchange_once(self, op: str, body: dict) -> dict:
        with self._lock:
            if self._proc is None or self._proc.poll() is not None:
                self._kill()
                self._spawn()
            assert self._proc is not None and self._proc.stdin is not None
            request = dict(body)
            request["op"] = op
            try:
                self._proc.stdin.write(json.dumps(request) + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                self._kill()
                raise TransportError(f"{op}: child pipe broke: {exc}") from exc
            try:
                line = self._replies.get(timeout=self.timeout)
            except queue.Empty:
                self._kill()
                raise TransportError(f"{op}: child reply timed out after {self.timeout}s")
            if line is None:
                self._kill()
                raise TransportError(f"{op}: child exited mid-request")
        try:
            doc = json.loads(line)
        except ValueError as exc:
            raise ProtocolError(f"{op}: reply line is not JSON") from exc
        if not isinstance(doc, dict):
            raise ProtocolError(f"{op}: reply is not an object")
        if "error" in doc:
            raise ProtocolError(f"{op}: backend error: {doc['error']}")
        return doc

    def _call(self, op: str, body: dict) -> dict:
        return call_with_retries(
            lambda: self._exchange_once(op, body), self.max_retries, self.retry_base_delay
        )

    def close(self) -> None:
        with self._lock:
            if self._proc is not None and self._proc.stdin is not None:
                try:
                    self._proc.stdin.close()
                except OSError:
                    pass
            if self._proc is not None:
                try:
                    self._proc.wait(timeout=5)
                except subprocess.TimeoutExpired:
                    self._kill()
                self._proc = None


class OperatorHTTPServer:
    """Serves an OperatorSuite over the wire format, in-process. Intended for
    tests and local tools; start() binds an ephemeral port by default."""

    def __init__(self, suite: OperatorSuite, host: str = "127.0.0.1", port: int = 0):
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):  # noqa: N802 - http.server API
                op = self.path.strip("/")
                try:
                    length = int(self.headers.get("Content-Length", "0"))
                    body = json.loads(self.rfile.read(length) or b"{}")
                    reply = dispatch_request(outer.suite, op, body)
                    status = 200
                except GroundingFailure:
                    reply, status = {"failure": True}, 200
                except (KeyError, TypeError, ValueError, ProtocolError) as exc:
                    reply, status = {"error": f"{type(exc).__name__}: {exc}"}, 400
                except Exception as exc:  # pragma: no cover - defensive
                    reply, status = {"error": f"{type(exc).__name__}: {exc}"}, 500
                data = json.dumps(reply, sort_keys=True).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):  # silence request logging
                pass

        self.suite = suite
        self._server = ThreadingHTTPServer((host, port), Handler)
        self._thread: Optional[threading.Thread] = None

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "OperatorHTTPServer":
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def __enter__(self) -> "OperatorHTTPServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
