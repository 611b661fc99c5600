"""Reconstruction and fusion tools."""

# Import built-in modules
from typing import Any

# Import local modules
from mfeit import pipeline
from mfeit.core.io import read_json
from mfeit.registry import register_tool
from mfeit.tools import run_stage


def register(mcp):
    """Register imaging tools.

    Args:
        mcp: The MCP server instance.

    Returns:
        list: List of registered tool names.

    """

    def reconstruct(config_path: str, out: str | None = None) -> dict[str, Any]:
        """Reconstruct one admittivity-change image per simulated frequency.

        Args:
            config_path: JSON run configuration; the simulate stage must have run in the same output directory.
            out: Output directory overriding ``output_dir``.

        Returns:
            dict: Output directory and the files written.

        """
        return run_stage(pipeline.run_reconstruct, config_path, out)

    def fuse(config_path: str, out: str | None = None) -> dict[str, Any]:
        """Fuse the reconstructed stack by principal component analysis."""
        result = run_stage(pipeline.run_fuse, config_path, out)
        pca = next(path for path in result["files"] if path.endswith("_pca.json"))
        result["pca"] = read_json(pca)["parts"]
        return result

    return [register_tool(mcp, reconstruct, "reconstruct"), register_tool(mcp, fuse, "fuse")]
