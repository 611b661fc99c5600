"""Application metadata and logging setup for mfeit."""

# Import built-in modules
import importlib.metadata
import sys

# Import third-party modules
from loguru import logger

# Constants
APP_NAME = "mfeit"
APP_DESCRIPTION = "Multi-frequency EIT simulation, asymptotic detection and spectroscopic imaging"
LOG_FORMAT = "{time:YYYY-MM-DD HH:mm:ss.SSS} | {level: <8} | {name} - {message}"

# Get version from package metadata
try:
    __version__ = importlib.metadata.version("mfeit")
except importlib.metadata.PackageNotFoundError:
    __version__ = "0.1.0"  # Default version if package is not installed


def configure_logging(debug: bool = False) -> None:
    """Install the single stderr sink used by the command-line entry points.

    Args:
        debug: Lower the threshold to DEBUG.

    """
    logger.remove()
    logger.add(sys.stderr, level="DEBUG" if debug else "INFO", format=LOG_FORMAT)
