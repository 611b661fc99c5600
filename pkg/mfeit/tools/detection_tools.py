"""Asymptotic detection tools."""

# Import built-in modules
from typing import Any

# Import local modules
from mfeit import pipeline
from mfeit.config import load_run_config
from mfeit.core.admittivity import Frequency
from mfeit.core.asymptotics import expansion_coefficients
from mfeit.core.io import read_json
from mfeit.registry import register_tool
from mfeit.tools import run_stage


def register(mcp):
    """Register detection tools.

    Args:
        mcp: The MCP server instance.

    Returns:
        list: List of registered tool names.

    """

    def detect(config_path: str, out: str | None = None, sign_flag: str | None = None) -> dict[str, Any]:
        """Locate segment endpoints and disk centers from the data at the detection frequency.

        Args:
            config_path: JSON run configuration.
            out: Output directory overriding ``output_dir``.
            sign_flag: "plus" or "minus", overriding ``detection.sign``.

        Returns:
            dict: The detection report and the files written.

        """
        result = run_stage(pipeline.run_detect, config_path, out, sign=sign_flag)
        report = next(path for path in result["files"] if path.endswith("report.json"))
        result["report"] = read_json(report)
        return result

    def get_expansion_coefficients(
        config_path: str, frequency_hz: float, direction: list[float] | None = None
    ) -> dict[str, Any]:
        """Forward expansion coefficients of the configured phantom at one frequency."""
        config = load_run_config(config_path)
        a = direction or list(config.detection.direction)
        coeffs = expansion_coefficients(config.build_phantom(), Frequency.from_hz(frequency_hz), a)
        return {"success": True, "frequency_hz": frequency_hz, **coeffs.to_dict()}

    return [
        register_tool(mcp, detect, "detect"),
        register_tool(mcp, get_expansion_coefficients, "expansion_coefficients"),
    ]
