# Import built-in modules
from pathlib import Path


PACKAGE_NAME = "mfeit"
THIS_ROOT = Path(__file__).parent.parent
