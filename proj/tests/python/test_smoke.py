import math
import os

import numpy as np
import pytest

import tinyssd


@pytest.fixture(scope="module")
def store():
    return tinyssd.init_random(3)


def test_describe_and_spec():
    assert "44@S -- 166@E1 -- 161@E3" in tinyssd.describe()
    assert '"fire5"' in tinyssd.spec_json()
    shapes = {name: (i, o) for name, i, o in tinyssd.intermediate_shapes()}
    assert shapes["fire3"][0][2:] == (37, 37)
    assert shapes["conv13_2"][1][2:] == (1, 1)


def test_audit():
    report = tinyssd.audit()
    assert report["pass"]
    assert abs(report["total_params"] - 1.13e6) / 1.13e6 <= 0.06
    assert abs(report["total_macs"] - 571.09e6) / 571.09e6 <= 0.10
    assert report["layers"][0][:2] == ("conv1", 1596)


def test_round_to_half():
    out = tinyssd.round_to_half(np.array([1.0, 0.1, 70000.0], dtype=np.float32))
    assert out.tolist() == [1.0, 0.0999755859375, 65504.0]


def test_store_save_load(store, tmp_path):
    assert store.element_count() == tinyssd.audit()["total_params"]
    assert store.get("conv1/w").shape == (57, 3, 3, 3)
    path = str(tmp_path / "m.tssd")
    tinyssd.save_model(store, path, "f16")
    quantized, stats = tinyssd.quantize_fp16(store)
    assert stats["clamped"] == 0
    assert tinyssd.load_model(path) == quantized
    with pytest.raises(tinyssd._core.TinySsdError):
        tinyssd.load_model(str(tmp_path / "missing.tssd"))


def test_forward_and_detect(store):
    image = tinyssd.preprocess_image(np.full((240, 320, 3), 128, dtype=np.uint8))
    assert image.shape == (1, 3, 300, 300)
    assert np.allclose(image[0, :, 5, 5], [24, 11, 5])
    loc, conf = tinyssd.forward(store, image)
    assert loc.shape == (8030, 4)
    assert conf.shape == (8030, 21)
    assert np.isfinite(loc).all() and np.isfinite(conf).all()
    dets = tinyssd.detect(loc, conf, conf_threshold=0.01, top_k=10)
    assert len(dets) <= 10
    for class_id, name, score, box in dets:
        assert 1 <= class_id <= 20 and score >= 0.01 and len(box) == 4


def test_priors_decode_nms():
    priors = tinyssd.generate_priors()
    assert priors.shape == (8030, 4)
    assert np.allclose(priors[-4], [0.06, 0.06, 0.94, 0.94], atol=1e-6)
    decoded = tinyssd.decode_boxes(np.zeros((8030, 4), dtype=np.float32))
    assert np.array_equal(decoded, priors)
    boxes = np.array([[0.1, 0.1, 0.4, 0.4], [0.1, 0.1, 0.4, 0.4], [0.6, 0.6, 0.9, 0.9]], dtype=np.float32)
    assert tinyssd.nms([0.8, 0.9, 0.5], boxes, 0.45) == [1, 2]


def test_evaluate(tmp_path):
    (tmp_path / "000001.xml").write_text(
        "<annotation><size><width>300</width><height>300</height></size>"
        "<object><name>dog</name><difficult>0</difficult><bndbox><xmin>1</xmin><ymin>1</ymin>"
        "<xmax>150</xmax><ymax>150</ymax></bndbox></object></annotation>"
    )
    lines = "000001 dog 0.9 0.0 0.0 0.5 0.5\n"
    result = tinyssd.evaluate(lines, str(tmp_path))
    assert math.isclose(result["map"], 1.0)
    assert tinyssd.evaluate("", str(tmp_path))["map"] == 0.0


def test_run_cli():
    code, out, err = tinyssd.run_cli(["audit", "--check"])
    assert code == 0
    assert "pass: true" in out
    code, _, err = tinyssd.run_cli(["nope"])
    assert code == 1 and err
