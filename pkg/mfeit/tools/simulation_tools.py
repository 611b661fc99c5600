"""Forward simulation and geometry tools."""

# Import built-in modules
from typing import Any

# Import local modules
from mfeit import pipeline
from mfeit.config import load_run_config
from mfeit.core.geometry import distance_report
from mfeit.core.io import read_json
from mfeit.registry import register_tool
from mfeit.tools import run_stage


def register(mcp):
    """Register simulation tools.

    Args:
        mcp: The MCP server instance.

    Returns:
        list: List of registered tool names.

    """

    def simulate(config_path: str, out: str | None = None, seed: int | None = None) -> dict[str, Any]:
        """Simulate multistatic boundary data for the configured phantom and frequency sweep.

        Args:
            config_path: JSON run configuration.
            out: Output directory overriding ``output_dir``.
            seed: Noise seed overriding ``seed``.

        Returns:
            dict: Output directory and the files written, manifest last.

        """
        return run_stage(pipeline.run_simulate, config_path, out, seed)

    def validate_jump(config_path: str, out: str | None = None) -> dict[str, Any]:
        """Run the thin-strip jump convergence study and return the fitted orders."""
        result = run_stage(pipeline.run_validate_jump, config_path, out)
        report = next(path for path in result["files"] if path.endswith("report.json"))
        result["orders"] = read_json(report)["orders"]
        return result

    def get_distance_report(config_path: str) -> dict[str, Any]:
        """Pairwise inclusion distances and distances to the boundary for the configured phantom."""
        phantom = load_run_config(config_path).build_phantom()
        report = distance_report(phantom)
        return {"success": True, "minimum": report.minimum(), "rows": report.to_frame().to_dict(orient="records")}

    return [
        register_tool(mcp, simulate, "simulate"),
        register_tool(mcp, validate_jump, "validate_jump"),
        register_tool(mcp, get_distance_report, "distance_report"),
    ]
