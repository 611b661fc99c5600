"""Multi-frequency electrical impedance tomography on a disk."""

# Import local modules
from mfeit.app import __version__

__all__ = ["__version__"]
