"""Tests for the file helpers."""

import numpy as np
import pandas as pd
import pytest
from PIL import Image

from mfeit.core.io import load_manifest, read_json, read_table, write_json, write_manifest, write_pgm, write_table
from mfeit.errors import IOFailure


class TestTables:
    """Test suite for CSV tables."""

    def test_missing_columns(self, tmp_path):
        path = write_table(pd.DataFrame({"a": [1.0]}), tmp_path / "t.csv")
        with pytest.raises(IOFailure, match="lacks columns"):
            read_table(path, ["a", "b"])

    def test_unreadable(self, tmp_path):
        with pytest.raises(IOFailure):
            read_table(tmp_path / "missing.csv")

    def test_float_precision(self, tmp_path):
        value = 1.0 / 3.0
        path = write_table(pd.DataFrame({"a": [value]}), tmp_path / "t.csv")
        assert read_table(path)["a"].iloc[0] == pytest.approx(value, rel=1e-16)


class TestJson:
    """Test suite for JSON documents."""

    def test_sorted_keys(self, tmp_path):
        path = write_json({"b": 1, "a": 2}, tmp_path / "doc.json")
        assert path.read_text().index('"a"') < path.read_text().index('"b"')
        assert read_json(path) == {"a": 2, "b": 1}

    def test_unserializable(self, tmp_path):
        with pytest.raises(IOFailure):
            write_json({"z": 1j}, tmp_path / "doc.json")


class TestPgm:
    """Test suite for PGM renderings."""

    def test_gray_levels(self, tmp_path):
        grid = np.array([[-1.0, 0.0], [1.0, np.nan]])
        path = write_pgm(grid, tmp_path / "img.pgm")
        pixels = np.asarray(Image.open(path))
        assert pixels.shape == (2, 2)
        assert pixels[0, 0] == 0
        assert pixels[1, 0] == 255
        assert pixels[1, 1] == 0
        assert pixels[0, 1] == 128


class TestManifest:
    """Test suite for manifests."""

    def test_paths_relative_and_verified(self, tmp_path):
        artifact = write_json({"x": 1}, tmp_path / "stage" / "a.json")
        manifest = write_manifest(tmp_path / "stage" / "manifest.json", [(artifact, {"kind": "doc"})], {"n": 1})
        data = load_manifest(manifest)
        assert data["files"][0]["path"] == "a.json"
        assert data["files"][0]["kind"] == "doc"
        assert data["meta"] == {"n": 1}

    def test_tampering_detected(self, tmp_path):
        artifact = write_json({"x": 1}, tmp_path / "a.json")
        manifest = write_manifest(tmp_path / "manifest.json", [(artifact, {})])
        artifact.write_text('{"x": 2}\n')
        with pytest.raises(IOFailure, match="hash mismatch"):
            load_manifest(manifest)
        assert load_manifest(manifest, verify=False)["files"][0]["path"] == "a.json"

    def test_not_a_manifest(self, tmp_path):
        path = write_json([1, 2], tmp_path / "m.json")
        with pytest.raises(IOFailure, match="not a manifest"):
            load_manifest(path)
