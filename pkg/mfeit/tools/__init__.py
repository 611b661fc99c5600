"""MCP tools module."""

# Import built-in modules
from collections.abc import Callable
from pathlib import Path
from typing import Any

# Import local modules
from mfeit.config import RunConfig, load_run_config


def run_stage(
    stage: Callable[[RunConfig], list[Path]],
    config_path: str,
    out: str | None = None,
    seed: int | None = None,
    sign: str | None = None,
) -> dict[str, Any]:
    """Load a run configuration, run one pipeline stage and list what it wrote."""
    config = load_run_config(config_path, out=out, seed=seed, sign=sign)
    written = stage(config)
    return {"success": True, "output_dir": str(config.output_dir), "files": [str(path) for path in written]}
