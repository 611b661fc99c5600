"""Unit tests for the MCP tools and resources."""

import json
from unittest.mock import MagicMock

import pytest
from mcp.server.fastmcp import FastMCP

from mfeit.resources import phantom_resources
from mfeit.tools import detection_tools, imaging_tools, simulation_tools

SEGMENT = {"P": [-0.3, 0.2], "Q": [0.2, 0.3], "C": [0.01, 0.02]}


def _tools(module):
    """Register a module on a mock server and return its wrapped functions by name."""
    mcp = MagicMock()
    module.register(mcp)
    names = [c.kwargs["name"] for c in mcp.tool.call_args_list]
    funcs = [c.args[0] for c in mcp.tool.return_value.call_args_list]
    return dict(zip(names, funcs, strict=True))


def _resources(module):
    mcp = MagicMock()
    module.register(mcp)
    paths = [c.args[0] for c in mcp.resource.call_args_list]
    funcs = [c.args[0] for c in mcp.resource.return_value.call_args_list]
    return dict(zip(paths, funcs, strict=True))


@pytest.fixture
def run_config(tmp_path):
    data = {
        "phantom": "parallel_strips",
        "output_dir": "out",
        "detection": {"synthetic": {"segments": [SEGMENT]}},
    }
    path = tmp_path / "run.json"
    path.write_text(json.dumps(data))
    return str(path)


def test_register_tools():
    """All tools register under the mfeit namespace."""
    mcp = FastMCP("test")
    assert simulation_tools.register(mcp) == ["mfeit_simulate", "mfeit_validate_jump", "mfeit_distance_report"]
    assert imaging_tools.register(mcp) == ["mfeit_reconstruct", "mfeit_fuse"]
    assert detection_tools.register(mcp) == ["mfeit_detect", "mfeit_expansion_coefficients"]


class TestDetectionTools:
    """Tests for the detection tools."""

    def test_detect(self, run_config, tmp_path):
        result = _tools(detection_tools)["mfeit_detect"](run_config, out=str(tmp_path / "elsewhere"))
        assert result["success"] is True
        assert result["output_dir"] == str((tmp_path / "elsewhere").resolve())
        assert result["report"]["sign"] == "plus"
        assert result["report"]["segments"][0]["P"] == pytest.approx([-0.3, 0.2], abs=1e-6)

    def test_detect_sign_flag(self, run_config):
        result = _tools(detection_tools)["mfeit_detect"](run_config, sign_flag="minus")
        assert result["report"]["sign"] == "minus"

    def test_detect_missing_config(self, tmp_path):
        result = _tools(detection_tools)["mfeit_detect"](str(tmp_path / "missing.json"))
        assert result["success"] is False
        assert result["error_type"] == "ConfigError"
        assert result["exit_code"] == 2

    def test_expansion_coefficients(self, run_config):
        result = _tools(detection_tools)["mfeit_expansion_coefficients"](run_config, 5.0e5, [0.0, 1.0])
        assert result["success"] is True
        assert result["a"] == [0.0, 1.0]
        assert len(result["segments"]) == 2
        assert len(result["disks"]) == 2
        assert result["segments"][0]["a_nu"] == pytest.approx(1.0)


class TestSimulationTools:
    """Tests for the simulation tools."""

    def test_distance_report(self, run_config):
        result = _tools(simulation_tools)["mfeit_distance_report"](run_config)
        assert result["success"] is True
        assert result["minimum"] >= 0.1
        assert result["rows"]

    def test_reconstruct_before_simulate(self, run_config):
        result = _tools(imaging_tools)["mfeit_reconstruct"](run_config)
        assert result["success"] is False
        assert result["exit_code"] == 4


class TestPhantomResources:
    """Tests for the phantom resources."""

    def test_list(self):
        resources = _resources(phantom_resources)
        assert resources["mfeit://phantoms"]() == {"phantoms": ["framed_disk", "homogeneous", "parallel_strips"]}

    def test_get_phantom(self):
        phantom = _resources(phantom_resources)["mfeit://phantoms/{name}"]("framed_disk")
        assert len(phantom["frames"]) == 1
        assert phantom["minimum_distance"] >= phantom["d0"]

    def test_default_materials(self):
        materials = _resources(phantom_resources)["mfeit://materials/default"]()
        assert materials["sigma_b"] == 1.0
