"""End-to-end runs of simulate, reconstruct and fuse on the built-in phantoms."""

import json

import numpy as np
import pytest

from mfeit import cli
from mfeit.config import load_run_config
from mfeit.core.pixels import Pixelation
from mfeit.core.reconstruct import read_image_stack, roi_contrast

pytestmark = pytest.mark.slow


def _run(tmp_path, phantom, **extra):
    path = tmp_path / "run.json"
    data = {
        "phantom": phantom,
        "output_dir": "out",
        "sweep": {"snr_db": 60.0},
        "mesh": {"h": 0.05},
        "pixels": {"n_grid": 32},
        **extra,
    }
    path.write_text(json.dumps(data))
    for command in ("simulate", "reconstruct", "fuse"):
        assert cli.main([command, "--config", str(path)]) == 0
    return load_run_config(path)


def _segment_roi(pixels, segments):
    roi = np.zeros(pixels.size, dtype=bool)
    for segment in segments:
        roi |= pixels.segment_mask(segment)
    return roi


def _disk_roi(pixels, disks):
    roi = np.zeros(pixels.size, dtype=bool)
    for disk in disks:
        roi |= pixels.disk_mask(disk.center, disk.radius + pixels.cell_size)
    return roi


def test_fused_image_shows_strips_and_disks(tmp_path):
    config = _run(tmp_path, "parallel_strips")
    phantom = config.build_phantom()
    pixels = Pixelation(32, 1.0)
    fused = read_image_stack(config.output_dir / "fuse" / "fused.csv", pixels).column(0).real
    assert np.abs(fused).max() > 1e-6
    segments, disks = _segment_roi(pixels, phantom.insulators), _disk_roi(pixels, phantom.disks)
    background = pixels.background_mask(segments, disks)
    assert roi_contrast(fused, segments, background) >= 2.0
    assert roi_contrast(fused, disks, background) >= 2.0

    meta = json.loads((config.output_dir / "fuse" / "fused_pca.json").read_text())
    assert meta["mode"] == "amplitude"
    assert meta["parts"]["re"]["n_kept"] == 2
    assert len(meta["frequencies_hz"]) == 6


def test_shielded_conductor_appears_at_high_frequency(tmp_path):
    config = _run(tmp_path, "framed_disk")
    phantom = config.build_phantom()
    pixels = Pixelation(32, 1.0)
    stack = read_image_stack(config.output_dir / "reconstruct" / "images.csv", pixels)
    shielded = _disk_roi(pixels, [d for d in phantom.disks if phantom.frames[0].encloses(np.asarray(d.center))])
    walls = _segment_roi(pixels, phantom.frames[0].edges())
    background = pixels.background_mask(shielded, walls, _disk_roi(pixels, phantom.disks))
    low, high = int(np.argmin(stack.frequencies_hz)), int(np.argmax(stack.frequencies_hz))

    def contrast(j, roi):
        return roi_contrast(stack.column(j).real, roi, background)

    assert contrast(high, shielded) >= 3.0 * contrast(low, shielded)
    assert contrast(low, walls) >= 2.0 * contrast(high, walls)
