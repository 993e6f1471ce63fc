import json

import numpy as np
import pytest

from snnaccel.core import ConvMode, QuantizedWeights
from snnaccel.idx import save_idx
from snnaccel.netconfig import config_from_dict
from snnaccel.stiw import save_weights

TINY_DOC = {
    "input": {"height": 8, "width": 8, "channels": 1},
    "timesteps": 1,
    "encode_first_conv": True,
    "arch": "4c3-8c3-p2-8c3-p2-fc10",
    "defaults": {"threshold": 200, "leak": 1.0, "vmem_width": 18},
    "latency": {"t_rw": 0, "t_pe": 1, "t_pes": 0},
}


def build_weights(cfg, rng, encoder_threshold=None):
    layers = []
    for spec in cfg.weighted_layers:
        if spec.mode is ConvMode.DEPTHWISE:
            shape = (spec.c_out, spec.k_h, spec.k_w)
        else:
            shape = (spec.c_out, spec.c_in, spec.k_h, spec.k_w)
        values = rng.integers(-128, 128, size=shape).astype(np.int8)
        bias = np.zeros(spec.c_out, dtype=np.int32)
        layers.append((spec, QuantizedWeights(values, bias)))
    return layers


@pytest.fixture
def tiny_setup(tmp_path):
    """Config file, weight file, and an IDX image/label pair on disk."""
    rng = np.random.default_rng(42)
    cfg = config_from_dict(TINY_DOC)
    # encoder sees u8 pixels, so it needs a much higher threshold than the
    # binary-input layers
    cfg.layers[0].threshold = 6000

    config_path = tmp_path / "tiny.json"
    doc = dict(TINY_DOC)
    config_path.write_text(json.dumps(doc))

    layers = build_weights(cfg, rng)
    weights_path = tmp_path / "tiny.stiw"
    save_weights(weights_path, layers)

    images = rng.integers(0, 256, size=(12, 8, 8)).astype(np.uint8)
    labels = rng.integers(0, 10, size=12).astype(np.uint8)
    images_path = tmp_path / "images.idx"
    labels_path = tmp_path / "labels.idx"
    save_idx(images_path, images)
    save_idx(labels_path, labels)

    return {
        "tmp_path": tmp_path,
        "config": cfg,
        "config_path": str(config_path),
        "weights_path": str(weights_path),
        "images_path": str(images_path),
        "labels_path": str(labels_path),
        "images": images,
        "labels": labels,
        "layers": layers,
    }
