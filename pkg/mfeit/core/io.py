"""File helpers shared by every stage: CSV tables, JSON documents, PGM renderings, manifests."""

from __future__ import annotations

# Import built-in modules
import hashlib
import json
from pathlib import Path
from typing import Any

# Import third-party modules
import numpy as np
import pandas as pd
from loguru import logger
from PIL import Image

# Import local modules
from mfeit.errors import IOFailure

FLOAT_FORMAT = "%.17g"
MANIFEST_VERSION = 1


def write_table(frame: pd.DataFrame, path: str | Path) -> Path:
    """Write a CSV table with lossless float formatting."""
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(target, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as exc:
        raise IOFailure(f"cannot write {target}: {exc}") from exc
    logger.debug(f"Wrote {len(frame)} rows to {target}")
    return target


def read_table(path: str | Path, columns: list[str] | None = None) -> pd.DataFrame:
    """Read a CSV table, checking that the expected columns are present."""
    source = Path(path)
    try:
        frame = pd.read_csv(source)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise IOFailure(f"cannot read table {source}: {exc}") from exc
    missing = [name for name in columns or [] if name not in frame.columns]
    if missing:
        raise IOFailure(f"{source} lacks columns {missing}")
    return frame


def write_json(data: Any, path: str | Path) -> Path:
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except (OSError, TypeError) as exc:
        raise IOFailure(f"cannot write {target}: {exc}") from exc
    return target


def read_json(path: str | Path) -> Any:
    source = Path(path)
    try:
        return json.loads(source.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise IOFailure(f"cannot read JSON document {source}: {exc}") from exc


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    try:
        with Path(path).open("rb") as handle:
            for chunk in iter(lambda: handle.read(1 << 16), b""):
                digest.update(chunk)
    except OSError as exc:
        raise IOFailure(f"cannot hash {path}: {exc}") from exc
    return digest.hexdigest()


def write_pgm(grid: np.ndarray, path: str | Path) -> Path:
    """Render a grid of values in [-1, 1] as an 8-bit PGM; NaN cells are black.

    Args:
        grid: 2D array, first row drawn at the top.
        path: Output file.

    Returns:
        Path: The written file.

    """
    values = np.asarray(grid, dtype=float)
    pixels = np.zeros(values.shape, dtype=np.uint8)
    finite = np.isfinite(values)
    pixels[finite] = np.rint(127.5 + 127.5 * np.clip(values[finite], -1.0, 1.0)).astype(np.uint8)
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(pixels).save(target, format="PPM")
    except OSError as exc:
        raise IOFailure(f"cannot write {target}: {exc}") from exc
    return target


def write_manifest(
    path: str | Path, files: list[tuple[Path, dict[str, Any]]], meta: dict[str, Any] | None = None
) -> Path:
    """Write a manifest listing artifacts with their SHA-256 hashes.

    Args:
        path: Manifest location; artifact paths are stored relative to its directory.
        files: Artifact path and descriptive fields per entry.
        meta: Run-level metadata.

    Returns:
        Path: The manifest file.

    """
    target = Path(path)
    root = target.parent
    entries = []
    for file, fields in files:
        entry = dict(fields)
        entry["path"] = Path(file).resolve().relative_to(root.resolve()).as_posix()
        entry["sha256"] = sha256_file(file)
        entries.append(entry)
    return write_json({"version": MANIFEST_VERSION, "meta": meta or {}, "files": entries}, target)


def load_manifest(path: str | Path, verify: bool = True) -> dict[str, Any]:
    """Read a manifest and, by default, check every artifact hash.

    Raises:
        IOFailure: If the manifest is unreadable or an artifact is missing or modified.

    """
    source = Path(path)
    data = read_json(source)
    if not isinstance(data, dict) or "files" not in data:
        raise IOFailure(f"{source} is not a manifest")
    for entry in data["files"]:
        entry["abspath"] = str(source.parent / entry["path"])
        if verify and sha256_file(entry["abspath"]) != entry["sha256"]:
            raise IOFailure(f"hash mismatch for {entry['path']} listed in {source}")
    return data
