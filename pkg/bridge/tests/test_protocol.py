"""Wire-level tests: raw HTTP requests against a served bridge, checking
reply shapes, failure envelopes, and the fixture layout written in record
mode.  No client library from any other package is involved."""

import base64
import io
import json

import numpy as np
import pytest
import requests
from PIL import Image

from occam_bridge import BridgeConfig, BridgeServer, StartupError
from occam_bridge.cli import build_parser, resolve_config
from occam_bridge.models import COLOR_TABLE
from occam_bridge.pngio import pixels_digest, sha16


def png_b64(pixels: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(pixels, mode="RGB").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def mask_png_b64(bits: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(bits.astype(np.uint8) * 255, mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


@pytest.fixture(scope="module")
def image():
    pixels = np.empty((24, 24, 3), dtype=np.uint8)
    pixels[:, :] = (235, 235, 220)
    pixels[4:12, 4:12] = COLOR_TABLE["red"]
    pixels[14:20, 14:20] = COLOR_TABLE["blue"]
    return pixels


@pytest.fixture(scope="module")
def server():
    with BridgeServer(BridgeConfig()) as srv:
        yield srv


def post(server, op, body, timeout=10):
    return requests.post(f"{server.base_url}/{op}", json=body, timeout=timeout)


def test_propose_reply_shape(server, image):
    resp = post(server, "propose", {"image_id": "a", "image_png_b64": png_b64(image)})
    assert resp.status_code == 200
    doc = resp.json()
    assert doc["concepts"] == ["red square", "blue square"]


def test_classify_scores_sum_to_one(server, image):
    resp = post(server, "classify", {"image_id": "a", "image_png_b64": png_b64(image)})
    assert resp.status_code == 200
    doc = resp.json()
    assert len(doc["class_names"]) == len(doc["scores"]) == 4
    assert abs(sum(doc["scores"]) - 1.0) <= 1e-6


def test_ground_round_trip_and_failure_reply(server, image):
    ok = post(server, "ground", {
        "image_id": "a", "image_png_b64": png_b64(image), "concept": "red square",
    })
    assert ok.status_code == 200 and "mask_png_b64" in ok.json()

    absent = post(server, "ground", {
        "image_id": "a", "image_png_b64": png_b64(image),
        "concept": "green pennant",
    })
    assert absent.status_code == 200
    assert absent.json() == {"failure": True}


def test_edit_preserves_pixels_outside_mask(server, image):
    bits = np.zeros((24, 24), dtype=bool)
    bits[4:12, 4:12] = True
    resp = post(server, "edit", {
        "image_id": "a", "image_png_b64": png_b64(image),
        "mask_png_b64": mask_png_b64(bits),
    })
    assert resp.status_code == 200
    data = base64.b64decode(resp.json()["image_png_b64"])
    edited = np.asarray(Image.open(io.BytesIO(data)).convert("RGB"))
    assert np.array_equal(edited[~bits], image[~bits])
    assert (edited[bits] == (235, 235, 220)).all()


def test_embed_reply_shape(server):
    resp = post(server, "embed", {"text": "fishing net"})
    assert resp.status_code == 200
    values = resp.json()["values"]
    assert len(values) == 512
    assert abs(np.linalg.norm(values) - 1.0) < 1e-9


@pytest.mark.parametrize("op,body,fragment", [
    ("ground", {"image_png_b64": "placeholder", "concept": "x"}, "undecodable"),
    ("ground", {}, "image_png_b64"),
    ("edit", {}, "image_png_b64"),
    ("embed", {}, "non-empty text"),
    ("propose", {}, "image_png_b64"),
])
def test_bad_requests_answer_400_with_reason(server, op, body, fragment):
    resp = post(server, op, body)
    assert resp.status_code == 400
    assert fragment in resp.json()["error"]


def test_edit_with_empty_mask_is_a_request_error(server, image):
    resp = post(server, "edit", {
        "image_id": "a", "image_png_b64": png_b64(image),
        "mask_png_b64": mask_png_b64(np.zeros((24, 24), dtype=bool)),
    })
    assert resp.status_code == 400
    assert "empty mask" in resp.json()["error"]


def test_unknown_endpoint_lists_served_ops(server):
    resp = post(server, "segment", {})
    assert resp.status_code == 400
    for op in ("/propose", "/ground", "/edit", "/classify", "/embed"):
        assert op in resp.json()["error"]


def test_malformed_json_body_answers_400(server):
    resp = requests.post(
        f"{server.base_url}/classify", data=b"not json{", timeout=10,
        headers={"Content-Type": "application/json"},
    )
    assert resp.status_code == 400
    assert "JSON" in resp.json()["error"]


def test_max_concepts_bounds_proposals(image):
    with BridgeServer(BridgeConfig(max_concepts=1)) as server:
        resp = post(server, "propose",
                    {"image_id": "a", "image_png_b64": png_b64(image)})
        assert resp.json()["concepts"] == ["red square"]


def test_record_mode_writes_fixture_layout(tmp_path, image):
    config = BridgeConfig(record_dir=str(tmp_path / "fx"))
    with BridgeServer(config) as server:
        body = {"image_id": "img-1", "image_png_b64": png_b64(image)}
        post(server, "propose", body)
        post(server, "classify", body)
        post(server, "ground", {**body, "concept": "red square"})
        post(server, "ground", {**body, "concept": "green pennant"})
        bits = np.zeros((24, 24), dtype=bool)
        bits[4:12, 4:12] = True
        post(server, "edit", {**body, "mask_png_b64": mask_png_b64(bits)})
        post(server, "embed", {"text": "red square"})

    root = tmp_path / "fx"
    assert (root / "prompt_template.txt").read_text().startswith("List the distinct")
    assert json.loads((root / "img-1" / "propose.json").read_text())["concepts"] \
        == ["red square", "blue square"]
    assert (root / "img-1" / "ground" / f"{sha16('red square')}.mask.png").is_file()
    failure = root / "img-1" / "ground" / f"{sha16('green pennant')}.failure.json"
    assert json.loads(failure.read_text()) == {
        "concept": "green pennant", "failure": True,
    }
    assert (root / "img-1" / "classify" / f"{pixels_digest(image)}.json").is_file()
    assert len(list((root / "img-1" / "edit").glob("*.png"))) == 1
    assert (root / "embed" / f"{sha16('red square')}.json").is_file()


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "bridge.json"
    cfg.write_text(json.dumps({"max_concepts": 5, "device": "cpu"}))
    args = build_parser().parse_args(
        ["serve", "--config", str(cfg), "--max-concepts", "2"]
    )
    resolved = resolve_config(args)
    assert resolved.max_concepts == 2
    args = build_parser().parse_args(["serve", "--config", str(cfg)])
    assert resolve_config(args).max_concepts == 5


def test_config_rejects_unknown_keys_and_models(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"max_concept": 5}))
    with pytest.raises(StartupError, match="unknown config keys"):
        BridgeConfig.from_file(cfg)
    unknown_model = BridgeConfig(models={**BridgeConfig().models,
                                         "classifier": "resnet-18/imagenet"})
    with pytest.raises(StartupError, match="available"):
        BridgeServer(unknown_model)


def test_startup_aborts_on_non_cpu_device():
    with pytest.raises(StartupError, match="cpu"):
        BridgeServer(BridgeConfig(device="mps"))
