import base64
import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from sketchmend.ckpt import CheckpointError
from sketchmend.config import apply_overrides
from sketchmend.engine import (
    edit,
    load_model,
    plan_letterbox,
    run_pipeline,
    strokes_to_model_sketch,
    unletterbox_map,
    letterbox_image,
)
from sketchmend.imaging import Stroke, StrokeSet, decode_gray_bytes, decode_image_bytes, encode_png
from sketchmend.service import create_app
from sketchmend.toydata import generate_image
from sketchmend.training import Trainer


@pytest.fixture(scope="module")
def tiny_checkpoint(tmp_path_factory):
    """A barely trained tiny model; enough for every contract test."""
    from sketchmend.config import RunConfig

    cfg = apply_overrides(
        RunConfig(),
        [
            "net.resolution=16",
            "net.base_width=8",
            "net.style_dim=16",
            "optim.batch_size=2",
            "train.min_sketch_px=1",
            "warp.area_frac=0.08, 0.2",
            "warp.n_interior=1, 2",
        ],
    )
    rng = np.random.default_rng(11)
    images = np.stack([generate_image(rng, 16)[0] for _ in range(8)])
    tr = Trainer(cfg, images)
    tr.train_step()
    path = tmp_path_factory.mktemp("ckpt") / "tiny.zip"
    tr.save(path)
    return path


@pytest.fixture(scope="module")
def handle(tiny_checkpoint):
    return load_model(tiny_checkpoint)


@pytest.fixture(scope="module")
def client(handle):
    return TestClient(create_app(handle, max_image_side=64))


def b64png(arr):
    return base64.b64encode(encode_png(arr)).decode("ascii")


class TestEngine:
    def test_load_missing(self, tmp_path):
        with pytest.raises(CheckpointError):
            load_model(tmp_path / "none.zip")

    def test_pipeline_contract(self, handle, rng):
        img = rng.random((16, 16, 3)).astype(np.float32)
        sketch = np.zeros((16, 16), dtype=np.float32)
        sketch[4:10, 7] = 1.0
        out = run_pipeline(handle, img, sketch)
        assert out.result.shape == img.shape
        assert out.mask.shape == (16, 16)
        assert 0.0 <= out.result.min() and out.result.max() <= 1.0
        # blend consistency: result == y1*m + x*(1-m)
        manual = out.y1 * out.mask[:, :, None] + img * (1 - out.mask[:, :, None])
        np.testing.assert_allclose(out.result, np.clip(manual, 0, 1), atol=1e-5)

    def test_pipeline_deterministic(self, handle, rng):
        img = rng.random((16, 16, 3)).astype(np.float32)
        sketch = (rng.random((16, 16)) > 0.9).astype(np.float32)
        a = run_pipeline(handle, img, sketch)
        b = run_pipeline(handle, img, sketch)
        np.testing.assert_array_equal(a.result, b.result)
        np.testing.assert_array_equal(a.mask, b.mask)

    def test_edit_requires_exactly_one_input(self, handle, rng):
        img = rng.random((16, 16, 3)).astype(np.float32)
        with pytest.raises(ValueError):
            edit(handle, img)
        with pytest.raises(ValueError):
            edit(handle, img, strokes=StrokeSet(), sketch=np.zeros((16, 16)))

    def test_edit_preserves_dimensions(self, handle, rng):
        img = rng.random((24, 12, 3)).astype(np.float32)
        res = edit(handle, img, strokes=StrokeSet(), return_mask=True)
        assert res.result.shape == (24, 12, 3)
        assert res.mask.shape == (24, 12)
        assert res.timing_ms > 0

    def test_letterbox_geometry(self):
        box = plan_letterbox(32, 16, 16)
        assert (box.new_h, box.new_w) == (16, 8)
        assert box.x_off == 4 and box.y_off == 0

    def test_letterbox_round_trip(self):
        # smooth content survives the down/up resample closely
        ys, xs = np.mgrid[0:32, 0:16]
        img = np.stack([ys / 31.0, xs / 15.0, (ys + xs) / 46.0], axis=2).astype(np.float32)
        box = plan_letterbox(32, 16, 16)
        packed = letterbox_image(img, box, 16)
        back = unletterbox_map(packed, box)
        assert back.shape == img.shape
        assert np.abs(back - img).mean() < 0.05

    def test_stroke_mapping_scales(self):
        box = plan_letterbox(32, 32, 16)  # scale 0.5
        strokes = StrokeSet((Stroke(points=((8.0, 8.0), (24.0, 8.0)), width=2.0),))
        sk = strokes_to_model_sketch(strokes, box, 16)
        assert sk[4, 4] == 1.0 and sk[4, 12] == 1.0
        assert sk[12, 4] == 0.0


class TestService:
    def test_health(self, client):
        r = client.get("/v1/health")
        assert r.status_code == 200
        body = r.json()
        assert body["status"] == "ok" and body["model_loaded"] is True
        assert "version" in body

    def test_models_lists_loaded(self, client, tiny_checkpoint):
        r = client.get("/v1/models")
        assert r.status_code == 200
        entries = r.json()["models"]
        assert any(e["loaded"] for e in entries)

    def test_edit_round_trip(self, client, rng):
        img = rng.random((16, 16, 3)).astype(np.float32)
        strokes = json.loads(StrokeSet((Stroke(points=((3.0, 3.0), (12.0, 9.0)), width=2.0),)).to_json())
        payload = {"image_b64": b64png(img), "strokes": strokes, "options": {"return_mask": True}}
        r = client.post("/v1/edit", json=payload)
        assert r.status_code == 200
        body = r.json()
        out = decode_image_bytes(base64.b64decode(body["result_b64"]))
        assert out.shape == img.shape
        mask = decode_gray_bytes(base64.b64decode(body["mask_b64"]))
        assert mask.shape == (16, 16)
        assert body["timing_ms"] > 0
        assert "y1_b64" not in body  # not requested

    def test_identical_requests_identical_bytes(self, client, rng):
        img = rng.random((16, 16, 3)).astype(np.float32)
        payload = {"image_b64": b64png(img), "strokes": {"strokes": []}}
        a = client.post("/v1/edit", json=payload).json()
        b = client.post("/v1/edit", json=payload).json()
        assert a["result_b64"] == b["result_b64"]

    def test_both_inputs_rejected(self, client, rng):
        img = rng.random((16, 16, 3)).astype(np.float32)
        payload = {
            "image_b64": b64png(img),
            "strokes": {"strokes": []},
            "sketch_b64": b64png(np.zeros((16, 16))),
        }
        assert client.post("/v1/edit", json=payload).status_code == 400

    def test_neither_input_rejected(self, client, rng):
        img = rng.random((16, 16, 3)).astype(np.float32)
        assert client.post("/v1/edit", json={"image_b64": b64png(img)}).status_code == 400

    def test_bad_base64_rejected(self, client):
        r = client.post("/v1/edit", json={"image_b64": "@@not-base64@@", "strokes": {"strokes": []}})
        assert r.status_code == 400

    def test_undecodable_image_rejected(self, client):
        blob = base64.b64encode(b"junk junk junk").decode("ascii")
        r = client.post("/v1/edit", json={"image_b64": blob, "strokes": {"strokes": []}})
        assert r.status_code == 422

    def test_bad_strokes_rejected(self, client, rng):
        img = rng.random((16, 16, 3)).astype(np.float32)
        r = client.post("/v1/edit", json={"image_b64": b64png(img), "strokes": {"wrong": 1}})
        assert r.status_code == 400

    def test_oversize_rejected(self, client, rng):
        img = rng.random((80, 80, 3)).astype(np.float32)
        r = client.post("/v1/edit", json={"image_b64": b64png(img), "strokes": {"strokes": []}})
        assert r.status_code == 400

    def test_sketch_dimension_mismatch_rejected(self, client, rng):
        img = rng.random((16, 16, 3)).astype(np.float32)
        sketch = np.zeros((8, 8), dtype=np.float32)
        r = client.post("/v1/edit", json={"image_b64": b64png(img), "sketch_b64": b64png(sketch)})
        assert r.status_code == 400

    def test_sketch_input_path(self, client, rng):
        img = rng.random((16, 16, 3)).astype(np.float32)
        sketch = np.zeros((16, 16), dtype=np.float32)
        sketch[5, 3:12] = 1.0
        r = client.post("/v1/edit", json={"image_b64": b64png(img), "sketch_b64": b64png(sketch)})
        assert r.status_code == 200

    def test_no_model_503(self):
        bare = TestClient(create_app(None))
        r = bare.post("/v1/edit", json={"image_b64": "aGk=", "strokes": {"strokes": []}})
        assert r.status_code == 503
        assert bare.get("/v1/health").json()["model_loaded"] is False

    def test_concurrent_identical_requests_identical_bytes(self, client, rng):
        from concurrent.futures import ThreadPoolExecutor

        img = rng.random((16, 16, 3)).astype(np.float32)
        payload = {
            "image_b64": b64png(img),
            "strokes": {"strokes": [{"points": [[2, 2], [13, 11]], "width": 2}]},
            "options": {"return_mask": True},
        }
        with ThreadPoolExecutor(max_workers=4) as pool:
            replies = list(pool.map(lambda _: client.post("/v1/edit", json=payload).json(), range(6)))
        assert all(r["result_b64"] == replies[0]["result_b64"] for r in replies)
        assert all(r["mask_b64"] == replies[0]["mask_b64"] for r in replies)
