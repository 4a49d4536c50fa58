"""HTTP server exposing the five operator endpoints.

Wire protocol (shared with every operator client):

    POST /propose   {image_id, image_png_b64}                -> {"concepts": [...]}
    POST /ground    {image_id, image_png_b64, concept}       -> {"mask_png_b64": ...} | {"failure": true}
    POST /edit      {image_id, image_png_b64, mask_png_b64}  -> {"image_png_b64": ...}
    POST /classify  {image_id, image_png_b64}                -> {"class_names": [...], "scores": [...]}
    POST /embed     {text}                                   -> {"values": [...]}

Request problems answer HTTP 400 with ``{"error": ...}``; unexpected
internal faults answer 500.  Every handler is synchronous and bounded, so
a request is always answered, never parked.  The HTTP server is
single-threaded: concurrent clients queue at the socket, giving each model
one request at a time.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer
from typing import Optional

from .config import BridgeConfig
from .errors import RequestError
from .models import ModelSuite, load_models
from .pngio import b64_mask, b64_rgb, mask_b64, rgb_b64
from .recording import FixtureRecorder

OPS = ("propose", "ground", "edit", "classify", "embed")


class BridgeServer:
    """Owns the loaded models, the optional recorder, and the HTTP loop."""

    def __init__(self, config: BridgeConfig):
        self.config = config
        self.models: ModelSuite = load_models(
            config.models, config.model_options, config.device
        )
        self.recorder: Optional[FixtureRecorder] = None
        if config.record_dir:
            self.recorder = FixtureRecorder(
                config.record_dir, config.rendered_prompt()
            )
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):  # noqa: N802 - http.server API
                op = self.path.strip("/")
                try:
                    if op not in OPS:
                        raise RequestError(
                            f"unknown endpoint {self.path!r}; serving: "
                            + ", ".join(f"/{o}" for o in OPS)
                        )
                    length = int(self.headers.get("Content-Length", "0"))
                    raw = self.rfile.read(length) if length else b"{}"
                    try:
                        body = json.loads(raw)
                    except ValueError as exc:
                        raise RequestError(f"body is not JSON: {exc}") from exc
                    if not isinstance(body, dict):
                        raise RequestError("body must be a JSON object")
                    reply, status = outer._serve(op, body), 200
                except RequestError as exc:
                    reply, status = {"error": str(exc)}, 400
                except Exception as exc:  # defensive: never leave a hang
                    reply, status = {"error": f"{type(exc).__name__}: {exc}"}, 500
                data = json.dumps(reply, sort_keys=True).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):  # keep stdout quiet
                pass

        self._server = HTTPServer((config.host, config.port), Handler)
        self._thread: Optional[threading.Thread] = None

    # --- request handling --------------------------------------------------

    @staticmethod
    def _image_from(body: dict) -> tuple[str, "np.ndarray"]:
        if "image_png_b64" not in body:
            raise RequestError("request is missing image_png_b64")
        try:
            pixels = rgb_b64(body["image_png_b64"])
        except Exception as exc:
            raise RequestError(f"undecodable image: {exc}") from exc
        return str(body.get("image_id", "request")), pixels

    def _serve(self, op: str, body: dict) -> dict:
        if op == "propose":
            image_id, pixels = self._image_from(body)
            concepts = self.models.proposer.propose(
                pixels, self.config.max_concepts
            )
            if self.recorder:
                self.recorder.record_propose(image_id, concepts)
            return {"concepts": concepts}

        if op == "ground":
            image_id, pixels = self._image_from(body)
            if "concept" not in body:
                raise RequestError("ground request is missing concept")
            concept = str(body["concept"])
            mask_bits = self.models.grounder.ground(pixels, concept)
            if mask_bits is None or not mask_bits.any():
                if self.recorder:
                    self.recorder.record_ground_failure(image_id, concept)
                return {"failure": True}
            if self.recorder:
                self.recorder.record_ground(image_id, concept, mask_bits)
            return {"mask_png_b64": b64_mask(mask_bits)}

        if op == "edit":
            image_id, pixels = self._image_from(body)
            if "mask_png_b64" not in body:
                raise RequestError("edit request is missing mask_png_b64")
            try:
                mask_bits = mask_b64(body["mask_png_b64"])
            except Exception as exc:
                raise RequestError(f"undecodable mask: {exc}") from exc
            edited = self.models.editor.edit(pixels, mask_bits)
            if self.recorder:
                self.recorder.record_edit(image_id, pixels, mask_bits, edited)
            return {"image_png_b64": b64_rgb(edited)}

        if op == "classify":
            image_id, pixels = self._image_from(body)
            class_names, scores = self.models.classifier.classify(pixels)
            if self.recorder:
                self.recorder.record_classify(image_id, pixels, class_names, scores)
            return {"class_names": list(class_names), "scores": scores}

        # embed
        text = str(body.get("text", ""))
        if not text:
            raise RequestError("embed request needs non-empty text")
        values = [float(v) for v in self.models.embedder.embed(text)]
        if self.recorder:
            self.recorder.record_embed(text, values)
        return {"values": values}

    # --- lifecycle ---------------------------------------------------------

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "BridgeServer":
        self._thread = threading.Thread(
            target=self._server.serve_forever, daemon=True
        )
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self._server.serve_forever()

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None

    def __enter__(self) -> "BridgeServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


def serve(config: BridgeConfig) -> BridgeServer:
    """Load models (aborting on failure) and return a started server."""
    return BridgeServer(config).start()
