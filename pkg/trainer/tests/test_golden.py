"""Cross-component golden test: weights exported by the trainer drive the
simulator (through its CLI and file formats only) and reproduce the
trainer's own integer forward pass bit for bit."""
import json
import os
import struct
import subprocess
import sys

import numpy as np
import pytest
import torch

torch.set_num_threads(2)

from snntrainer.data import synthetic_dataset
from snntrainer.quantize import integer_forward, quantize_export, read_stie
from snntrainer.train import TrainConfig, train

ARCH = "16c3-32c3-p2-32c3-p2-fc10"
SIM_CONFIG = {
    "input": {"height": 28, "width": 28, "channels": 1},
    "timesteps": 1,
    "encode_first_conv": True,
    "arch": ARCH,
    "defaults": {"threshold": 64, "leak": 1.0, "vmem_width": 18},
}
# simulator layer labels for the spiking pipeline layers, in order
SIM_LABELS = ["enc", "l00_standard", "l01_pool", "l02_standard", "l03_pool"]


def write_idx_images(path, images):
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", 0x00000803, *images.shape))
        fh.write(images.tobytes())


def run_simulator(args):
    proc = subprocess.run([sys.executable, "-m", "snnaccel.cli"] + args,
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc


@pytest.fixture(scope="module")
def exported_setup(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("golden")
    data = synthetic_dataset(300, 100, seed=11)
    cfg = TrainConfig(arch=ARCH, timesteps=1, reduced_timesteps=1, epochs=1,
                      loss="tet", seed=3)
    result = train(cfg, data)

    stiw_path = tmp / "exported.stiw"
    layers = quantize_export(result.model, str(stiw_path))

    images = data[2]  # the held-out split
    images_path = tmp / "samples.idx"
    write_idx_images(images_path, images)

    config_path = tmp / "sim.json"
    config_path.write_text(json.dumps(SIM_CONFIG))
    return {"tmp": tmp, "layers": layers, "images": images,
            "stiw": str(stiw_path), "idx": str(images_path),
            "config": str(config_path)}


class TestGolden:
    def test_simulator_loads_exported_extents(self, exported_setup):
        run_simulator(["infer", "--config", exported_setup["config"],
                       "--weights", exported_setup["stiw"],
                       "--images", exported_setup["idx"],
                       "--limit", "1",
                       "--out", str(exported_setup["tmp"] / "probe.json")])

    def test_forward_spikes_match_exactly_on_100_samples(self, exported_setup):
        tmp = exported_setup["tmp"]
        events_dir = tmp / "events"
        out = tmp / "report.json"
        run_simulator(["infer", "--config", exported_setup["config"],
                       "--weights", exported_setup["stiw"],
                       "--images", exported_setup["idx"],
                       "--limit", "100", "--dump-events", str(events_dir),
                       "--out", str(out)])
        report = json.loads(out.read_text())
        assert report["images"] == 100

        mismatches = 0
        for i in range(100):
            potentials, spike_maps = integer_forward(
                exported_setup["layers"], exported_setup["images"][i])
            # predictions agree
            assert report["predictions"][i] == int(np.argmax(potentials)), i
            # every layer's spike map agrees bit for bit
            assert len(spike_maps) == len(SIM_LABELS)
            for label, ours in zip(SIM_LABELS, spike_maps):
                raw = (events_dir / f"img{i:05d}_{label}_t0.stie").read_bytes()
                theirs = read_stie(raw)
                if not np.array_equal(ours, theirs):
                    mismatches += 1
        assert mismatches == 0
