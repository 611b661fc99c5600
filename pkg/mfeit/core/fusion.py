"""Principal component fusion of a multi-frequency image stack.

Real and imaginary parts are treated separately. Each part is centered on its
across-frequency mean image, decomposed by a thin SVD (never forming the
pixel-by-pixel covariance), truncated to the leading components and collapsed
over frequency into one image.
"""

from __future__ import annotations

# Import built-in modules
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Literal

# Import third-party modules
import numpy as np
from loguru import logger
from scipy import linalg

# Import local modules
from mfeit.core.io import write_json, write_pgm
from mfeit.core.reconstruct import ImageStack, write_image_stack
from mfeit.errors import ConfigError, DimensionMismatch, NumericalFailure, TooFewFrequencies

Part = Literal["re", "im"]
FuseMode = Literal["average", "amplitude"]
DEGENERATE_GAP = 1e-8


def _part(stack: ImageStack, part: Part) -> np.ndarray:
    if part == "re":
        return stack.images.real
    if part == "im":
        return stack.images.imag
    raise ConfigError(f"unknown image part {part!r}")


def mean_image(stack: ImageStack, part: Part) -> np.ndarray:
    """Across-frequency average of one part of the stack."""
    return _part(stack, part).mean(axis=1)


def center_stack(stack: ImageStack, part: Part) -> np.ndarray:
    """Subtract the across-frequency mean image from every column.

    Raises:
        TooFewFrequencies: If the stack has fewer than two frequencies.

    """
    if stack.n_frequencies < 2:
        raise TooFewFrequencies(f"PCA fusion needs at least 2 frequencies, got {stack.n_frequencies}")
    values = _part(stack, part)
    return values - values.mean(axis=1, keepdims=True)


@dataclass(frozen=True)
class PcaDecomposition:
    """Thin SVD of a centered stack with covariance eigenvalues ``s**2 / N_w``."""

    mean_image: np.ndarray
    singular_values: np.ndarray
    left_vectors: np.ndarray
    right_vectors: np.ndarray
    rank: int
    n_kept: int
    degenerate: tuple[tuple[int, int], ...] = ()

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.singular_values**2 / self.right_vectors.shape[0]

    @property
    def energy_fraction(self) -> float:
        total = float(self.eigenvalues.sum())
        return float(self.eigenvalues[: self.n_kept].sum()) / total if total > 0.0 else 0.0

    def truncated(self, n: int | None = None) -> np.ndarray:
        """``sum_{i < n} s_i u_i v_i^T`` (all kept components by default)."""
        k = self.n_kept if n is None else n
        return (self.left_vectors[:, :k] * self.singular_values[:k]) @ self.right_vectors[:, :k].T

    def with_kept(self, n_kept: int) -> PcaDecomposition:
        return replace(self, n_kept=n_kept)

    def to_dict(self) -> dict[str, Any]:
        return {
            "singular_values": self.singular_values.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "rank": self.rank,
            "n_kept": self.n_kept,
            "energy_fraction": self.energy_fraction,
            "degenerate": [list(pair) for pair in self.degenerate],
        }


def decompose(centered: np.ndarray, mean: np.ndarray | None = None) -> PcaDecomposition:
    """Thin SVD of a centered M x N_w matrix.

    Args:
        centered: Output of :func:`center_stack`.
        mean: Mean image removed by the centering; zeros when omitted.

    Returns:
        PcaDecomposition: Components in descending order with every numerically nonzero one kept.

    Raises:
        NumericalFailure: If the SVD does not converge.

    """
    matrix = np.asarray(centered, dtype=float)
    try:
        u, s, vh = linalg.svd(matrix, full_matrices=False)
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericalFailure(f"SVD of the centered stack failed: {exc}") from exc
    # deterministic signs: largest pixel loading of every component is positive
    lead = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[lead, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    u, vh = u * signs, vh * signs[:, None]
    cutoff = (s[0] if s.size else 0.0) * max(matrix.shape) * np.finfo(float).eps
    rank = int(np.sum(s > cutoff))
    degenerate = []
    for i in range(rank - 1):
        if s[i] ** 2 - s[i + 1] ** 2 <= DEGENERATE_GAP * s[i] ** 2:
            degenerate.append((i, i + 1))
            logger.warning(f"Eigenvalues {i} and {i + 1} are degenerate; their components are not unique")
    mean_image = np.zeros(matrix.shape[0]) if mean is None else np.asarray(mean, dtype=float)
    return PcaDecomposition(mean_image, s, u, vh.T, rank, rank, tuple(degenerate))


def project(image: np.ndarray, decomposition: PcaDecomposition) -> np.ndarray:
    """Principal components ``p_i = u_i . (image - mean_image)`` for the kept components."""
    values = np.asarray(image, dtype=float)
    if values.shape != decomposition.mean_image.shape:
        raise DimensionMismatch(f"image has {values.shape} pixels, decomposition {decomposition.mean_image.shape}")
    return decomposition.left_vectors[:, : decomposition.n_kept].T @ (values - decomposition.mean_image)


def fuse_decomposition(
    decomposition: PcaDecomposition, mode: FuseMode = "amplitude", add_mean: bool = False
) -> np.ndarray:
    """Collapse the kept rank-N oscillation ``sum s_i u_i v_i^T`` over frequency.

    "amplitude" is the per-pixel RMS over frequency. "average" is the per-pixel mean, which vanishes
    for any N because every centered row has zero mean.
    """
    oscillation = decomposition.truncated()
    if mode == "average":
        fused = oscillation.mean(axis=1)
    elif mode == "amplitude":
        fused = np.sqrt(np.mean(oscillation**2, axis=1))
    else:
        raise ConfigError(f"unknown fusion mode {mode!r}")
    return fused + decomposition.mean_image if add_mean else fused


@dataclass(frozen=True)
class FusedImage:
    """One integrated image per part with the decompositions that produced them."""

    real: np.ndarray
    imag: np.ndarray
    decompositions: dict[str, PcaDecomposition]
    mode: FuseMode
    add_mean: bool

    def metadata(self) -> dict[str, Any]:
        return {
            "mode": self.mode,
            "add_mean": self.add_mean,
            "parts": {part: dec.to_dict() for part, dec in self.decompositions.items()},
        }


def _fuse_part(
    stack: ImageStack, part: Part, n_components: int, mode: FuseMode, add_mean: bool
) -> tuple[np.ndarray, PcaDecomposition]:
    mean = mean_image(stack, part)
    decomposition = decompose(center_stack(stack, part), mean)
    kept = min(n_components, decomposition.rank)
    if n_components > decomposition.rank:
        logger.warning(f"Requested {n_components} components but the {part} stack has rank {decomposition.rank}")
    decomposition = decomposition.with_kept(kept)
    return fuse_decomposition(decomposition, mode, add_mean), decomposition


def fuse(
    stack: ImageStack, n_components: int = 2, mode: FuseMode = "amplitude", add_mean: bool = False
) -> FusedImage:
    """Integrated real and imaginary images from the leading principal components.

    Args:
        stack: Per-frequency images.
        n_components: Number of components kept; truncated to the rank with a warning.
        mode: "amplitude" (default) takes the row RMS of the rank-N oscillation; "average" its row mean.
        add_mean: Add the across-frequency mean image back.

    Returns:
        FusedImage: Fused real and imaginary images.

    """
    if n_components < 1:
        raise ConfigError("n_components must be at least 1")
    real, dec_re = _fuse_part(stack, "re", n_components, mode, add_mean)
    imag, dec_im = _fuse_part(stack, "im", n_components, mode, add_mean)
    logger.info(
        f"Fused {stack.n_frequencies} frequencies with N={dec_re.n_kept}/{dec_im.n_kept} components ({mode})"
    )
    return FusedImage(real, imag, {"re": dec_re, "im": dec_im}, mode, add_mean)


def write_fused(fused: FusedImage, stack: ImageStack, directory: str | Path, stem: str = "fused") -> list[Path]:
    """Write the fused CSV (single column, omega 0), two PGM renderings and the metadata JSON."""
    out = Path(directory)
    single = ImageStack((fused.real + 1j * fused.imag)[:, None], [0.0], stack.pixelation)
    paths = [write_image_stack(single, out / f"{stem}.csv")]
    for part, values in (("re", fused.real), ("im", fused.imag)):
        peak = float(np.max(np.abs(values))) if values.size else 0.0
        scaled = values / peak if peak > 0.0 else values
        paths.append(write_pgm(stack.pixelation.to_grid(scaled), out / f"{stem}_{part}.pgm"))
    meta = fused.metadata() | {"frequencies_hz": stack.frequencies_hz.tolist(), "normalization": "max-abs"}
    paths.append(write_json(meta, out / f"{stem}_pca.json"))
    return paths
