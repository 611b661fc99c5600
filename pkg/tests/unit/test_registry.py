"""Tests for tool and resource registration."""

from unittest.mock import MagicMock

from mcp.server.fastmcp import FastMCP

from mfeit.registry import (
    register_all_resources,
    register_all_tools,
    register_from_module,
    register_resource,
    register_tool,
)


def sample_tool(x: int) -> dict:
    return {"success": True, "x": x}


class TestRegisterTool:
    """Test suite for register_tool."""

    def test_namespace_prefix(self):
        """Tool names get the mfeit_ prefix once."""
        mcp = MagicMock()
        assert register_tool(mcp, sample_tool) == "mfeit_sample_tool"
        assert register_tool(mcp, sample_tool, "mfeit_custom") == "mfeit_custom"
        assert register_tool(mcp, sample_tool, "plain", namespace="") == "plain"
        assert [c.kwargs["name"] for c in mcp.tool.call_args_list] == ["mfeit_sample_tool", "mfeit_custom", "plain"]

    def test_wrapped_function_reports_errors(self):
        """Registered tools return an error payload instead of raising."""
        mcp = MagicMock()
        register_tool(mcp, sample_tool)
        wrapped = mcp.tool.return_value.call_args.args[0]
        assert wrapped(3) == {"success": True, "x": 3}
        assert wrapped("a", "b")["success"] is False

    def test_without_debug(self):
        """debug=False registers the bare function."""
        mcp = MagicMock()
        register_tool(mcp, sample_tool, debug=False)
        assert mcp.tool.return_value.call_args.args[0] is sample_tool

    def test_register_resource(self):
        """Resources are registered under their URI."""
        mcp = MagicMock()
        assert register_resource(mcp, sample_tool, "mfeit://sample") == "mfeit://sample"
        mcp.resource.assert_called_once_with("mfeit://sample")


class TestRegisterAll:
    """Test suite for package-wide registration."""

    def test_all_tool_modules(self):
        """Every tool module of the package is registered."""
        registered = register_all_tools(FastMCP("test"))
        names = {name for items in registered.values() for name in items}
        assert set(registered) == {
            "mfeit.tools.detection_tools",
            "mfeit.tools.imaging_tools",
            "mfeit.tools.simulation_tools",
        }
        assert {"mfeit_simulate", "mfeit_reconstruct", "mfeit_fuse", "mfeit_detect", "mfeit_validate_jump"} <= names

    def test_all_resources(self):
        """Phantom resources are registered."""
        registered = register_all_resources(FastMCP("test"))
        assert "mfeit://phantoms" in registered["mfeit.resources.phantom_resources"]

    def test_modules_register_once_per_server(self):
        """A second pass on the same server registers nothing; another server starts fresh."""
        mcp = FastMCP("test")
        assert register_all_tools(mcp)
        assert register_all_tools(mcp) == {}
        assert register_all_tools(FastMCP("other"))

    def test_missing_module(self):
        """Modules that cannot be imported are skipped."""
        assert register_from_module(FastMCP("test"), "mfeit.tools.missing", "tool") == []
        assert register_all_tools(FastMCP("test"), "mfeit.nothing_here") == {}

    def test_module_without_hook(self):
        """Modules without register() contribute nothing."""
        assert register_from_module(FastMCP("test"), "mfeit.core.io", "tool") == []
