"""Linearized per-frequency admittivity imaging.

The sensitivity of ``V^{k,j}`` to a pixel perturbation ``dgamma`` is
``-int_pixel grad u_k . grad u_j`` for homogeneous reference fields. Fields
for a unit background are computed once; at frequency ``omega`` they scale as
``1 / gamma_b(omega)``, so the matrix scales as ``1 / gamma_b(omega)**2``.
"""

from __future__ import annotations

# Import built-in modules
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal

# Import third-party modules
import numpy as np
import pandas as pd
from loguru import logger
from scipy import linalg, sparse
from scipy.optimize import brentq

# Import local modules
from mfeit.core.admittivity import Frequency, MaterialSpec
from mfeit.core.forward import ForwardSystem, basis_gradients
from mfeit.core.io import read_table, write_pgm, write_table
from mfeit.core.mesh import Mesh
from mfeit.core.pixels import Pixelation
from mfeit.core.protocol import BoundaryDataset, ElectrodeLayout, injection_loads
from mfeit.errors import ConfigError, DimensionMismatch, NumericalFailure, SingularSystem

IMAGE_COLUMNS = ["pixel_id", "x_center", "y_center", "omega", "re_dgamma", "im_dgamma"]


@dataclass(frozen=True)
class SensitivityMatrix:
    """Unit-background sensitivity rows for the (k, j) pairs in ``rows`` (0-based)."""

    J: np.ndarray
    rows: np.ndarray
    pixelation: Pixelation
    materials: MaterialSpec
    n_electrodes: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.J.shape

    def at(self, omega: Frequency | float) -> np.ndarray:
        """Sensitivity matrix for the background admittivity at ``omega``."""
        return self.J / self.materials.gamma_b(omega) ** 2

    def select(self, exclude: np.ndarray) -> np.ndarray:
        """Indices of rows whose (k, j) entry is not flagged in ``exclude``."""
        flags = np.asarray(exclude, dtype=bool)
        if flags.shape != (self.n_electrodes, self.n_electrodes):
            raise DimensionMismatch(f"mask shape {flags.shape} does not match {self.n_electrodes} electrodes")
        return np.flatnonzero(~flags[self.rows[:, 0], self.rows[:, 1]])


def pixel_incidence(mesh: Mesh, pixelation: Pixelation) -> sparse.csr_matrix:
    """Sparse (M, T) matrix of triangle areas by pixel; triangles are assigned by centroid."""
    owner = pixelation.locate(mesh.centroids)
    inside = np.flatnonzero(owner >= 0)
    return sparse.csr_matrix(
        (mesh.areas[inside], (owner[inside], inside)), shape=(pixelation.size, mesh.n_triangles)
    )


def unit_reference_gradients(mesh: Mesh, layout: ElectrodeLayout) -> np.ndarray:
    """Gradients of the unit-background injection fields, shape (T, N_E, 2)."""
    system = ForwardSystem(mesh, np.ones(mesh.n_triangles, dtype=complex), {}, mesh.homogeneous_node_map())
    u = system.solve_loads(injection_loads(mesh, layout))
    return np.einsum("tin,tik->tnk", u[mesh.triangles], basis_gradients(mesh))


def build_sensitivity(
    mesh: Mesh,
    layout: ElectrodeLayout,
    materials: MaterialSpec,
    pixelation: Pixelation,
    mask: np.ndarray | None = None,
) -> SensitivityMatrix:
    """Assemble ``J[(k, j), m] = -int_{pixel m} grad u_k . grad u_j`` for a unit background.

    Args:
        mesh: Mesh of the domain; duplicated crack nodes are merged.
        layout: Electrode layout of the injections.
        materials: Materials whose background admittivity scales the matrix per frequency.
        pixelation: Pixel grid of the images.
        mask: Flags of (k, j) pairs to leave out; all pairs are kept when omitted.

    Returns:
        SensitivityMatrix: Rows ordered by k then j.

    """
    if not math.isclose(pixelation.radius, mesh.domain_radius):
        raise DimensionMismatch("pixelation radius differs from the mesh domain radius")
    n = layout.n_electrodes
    keep = np.ones((n, n), dtype=bool) if mask is None else ~np.asarray(mask, dtype=bool)
    rows = np.argwhere(keep)
    grads = unit_reference_gradients(mesh, layout)
    incidence = pixel_incidence(mesh, pixelation)
    blocks = []
    for k in range(n):
        products = np.einsum("tc,tjc->tj", grads[:, k, :], grads)
        blocks.append(-(incidence @ products).T)
    full = np.stack(blocks)
    J = full[rows[:, 0], rows[:, 1]]
    logger.info(f"Built sensitivity matrix with {J.shape[0]} rows over {pixelation.size} pixels")
    return SensitivityMatrix(J, rows, pixelation, materials, n)


# -- regularized inversion ----------------------------------------------------------


def _tikhonov(u: np.ndarray, s: np.ndarray, vh: np.ndarray, d: np.ndarray, alpha: float) -> np.ndarray:
    return vh.conj().T @ ((s / (s**2 + alpha)) * (u.conj().T @ d))


def select_alpha_discrepancy(
    matrix: np.ndarray, data: np.ndarray, noise_norm: float, tau: float = 1.0
) -> float:
    """Tikhonov parameter whose residual norm equals ``tau * noise_norm``.

    Args:
        matrix: Forward matrix.
        data: Right-hand side.
        noise_norm: Norm of the data error.
        tau: Safety factor, at least 1 in the classical principle.

    Returns:
        float: The regularization parameter; the bracket end when the target is out of reach.

    """
    u, s, vh = linalg.svd(matrix, full_matrices=False)
    target = tau * noise_norm
    smax2 = float(s[0] ** 2) if s.size else 1.0

    def gap(log_alpha: float) -> float:
        x = _tikhonov(u, s, vh, data, math.exp(log_alpha))
        return float(np.linalg.norm(matrix @ x - data)) - target

    lo, hi = math.log(smax2 * 1e-14), math.log(smax2 * 1e4)
    if gap(lo) >= 0.0:
        logger.warning("Discrepancy target is below the attainable residual; using the smallest alpha")
        return math.exp(lo)
    if gap(hi) <= 0.0:
        return math.exp(hi)
    return math.exp(brentq(gap, lo, hi, xtol=1e-6))


def reconstruct_frequency(
    dataset: BoundaryDataset,
    reference: BoundaryDataset,
    sensitivity: SensitivityMatrix,
    alpha: float | None = None,
    *,
    relative_alpha: float = 1e-4,
    noise_level: float | None = None,
    tau: float = 1.0,
) -> np.ndarray:
    """Tikhonov-regularized linearized image of one frequency.

    Args:
        dataset: Voltages of the phantom.
        reference: Homogeneous voltages at the same frequency.
        sensitivity: Unit-background sensitivity matrix.
        alpha: Fixed regularization parameter; overrides the other rules.
        relative_alpha: Default ``alpha = relative_alpha * ||J||_2**2``.
        noise_level: Noise standard deviation per voltage; selects alpha by the discrepancy principle.
        tau: Discrepancy safety factor.

    Returns:
        np.ndarray: Complex ``dgamma`` per pixel.

    Raises:
        SingularSystem: If ``alpha`` is zero and the usable rows do not determine every pixel.

    """
    diff = dataset.minus(reference)
    usable = sensitivity.select(diff.mask)
    matrix = sensitivity.at(dataset.omega)[usable]
    rows = sensitivity.rows[usable]
    data = diff.V[rows[:, 0], rows[:, 1]]
    try:
        u, s, vh = linalg.svd(matrix, full_matrices=False)
    except linalg.LinAlgError as exc:
        raise NumericalFailure(f"SVD of the sensitivity matrix failed: {exc}") from exc
    if alpha is not None:
        if alpha < 0.0:
            raise ConfigError("alpha must be nonnegative")
        chosen = float(alpha)
    elif noise_level is not None:
        chosen = select_alpha_discrepancy(matrix, data, noise_level * math.sqrt(data.size), tau)
    else:
        chosen = relative_alpha * float(s[0] ** 2)
    if chosen == 0.0:
        rank = int(np.sum(s > s[0] * max(matrix.shape) * np.finfo(float).eps))
        if rank < matrix.shape[1]:
            raise SingularSystem(f"alpha = 0 with rank {rank} < {matrix.shape[1]} pixels")
    logger.debug(f"Inverting {data.size} voltages at {dataset.hz:.6g} Hz with alpha={chosen:.3g}")
    return _tikhonov(u, s, vh, data, chosen)


@dataclass(frozen=True)
class ImageStack:
    """Complex images as columns, one per frequency."""

    images: np.ndarray
    omegas: np.ndarray
    pixelation: Pixelation
    meta: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        images = np.asarray(self.images, dtype=complex)
        if images.ndim != 2 or images.shape[1] != np.asarray(self.omegas).size:
            raise DimensionMismatch(
                f"image matrix {images.shape} does not match {np.size(self.omegas)} frequencies"
            )
        self.pixelation.check(images)
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "omegas", np.asarray(self.omegas, dtype=float))

    @property
    def n_frequencies(self) -> int:
        return int(self.omegas.size)

    @property
    def frequencies_hz(self) -> np.ndarray:
        return self.omegas / (2.0 * math.pi)

    def column(self, j: int) -> np.ndarray:
        return self.images[:, j]

    def normalized(self, j: int, part: Literal["re", "im"]) -> np.ndarray:
        """Real or imaginary part of column ``j`` scaled to max absolute value 1."""
        values = self.images[:, j].real if part == "re" else self.images[:, j].imag
        peak = float(np.max(np.abs(values))) if values.size else 0.0
        return values / peak if peak > 0.0 else values.copy()


def reconstruct_sweep(
    datasets: Sequence[BoundaryDataset],
    references: Sequence[BoundaryDataset],
    sensitivity: SensitivityMatrix,
    alpha: float | None = None,
    workers: int | None = None,
    **kwargs: Any,
) -> ImageStack:
    """Reconstruct every frequency independently; columns follow the dataset order."""
    if len(datasets) != len(references):
        raise DimensionMismatch(f"{len(datasets)} datasets but {len(references)} references")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(reconstruct_frequency, data, ref, sensitivity, alpha, **kwargs)
            for data, ref in zip(datasets, references, strict=True)
        ]
        columns = [future.result() for future in futures]
    images = np.column_stack(columns) if columns else np.zeros((sensitivity.pixelation.size, 0), dtype=complex)
    return ImageStack(images, [d.omega for d in datasets], sensitivity.pixelation)


def roi_contrast(image: np.ndarray, roi: np.ndarray, background: np.ndarray) -> float:
    """Mean magnitude over the ROI divided by the standard deviation over the background."""
    values = np.asarray(image)
    inside = np.abs(values[np.asarray(roi, dtype=bool)])
    spread = float(np.std(values[np.asarray(background, dtype=bool)]))
    if inside.size == 0:
        raise ConfigError("region of interest contains no pixels")
    level = float(inside.mean())
    if spread == 0.0:
        return math.inf if level > 0.0 else 0.0
    return level / spread


# -- files ------------------------------------------------------------------------


def image_frame(stack: ImageStack) -> pd.DataFrame:
    centers = stack.pixelation.centers
    m, n = stack.images.shape
    return pd.DataFrame(
        {
            "pixel_id": np.tile(np.arange(m), n),
            "x_center": np.tile(centers[:, 0], n),
            "y_center": np.tile(centers[:, 1], n),
            "omega": np.repeat(stack.omegas, m),
            "re_dgamma": stack.images.real.T.ravel(),
            "im_dgamma": stack.images.imag.T.ravel(),
        },
        columns=IMAGE_COLUMNS,
    )


def write_image_stack(stack: ImageStack, path: str | Path) -> Path:
    return write_table(image_frame(stack), path)


def read_image_stack(path: str | Path, pixelation: Pixelation) -> ImageStack:
    """Read an image CSV back onto ``pixelation``.

    Raises:
        DimensionMismatch: If the pixel centers do not belong to ``pixelation``.

    """
    frame = read_table(path, IMAGE_COLUMNS)
    omegas = pd.unique(frame["omega"])
    m = pixelation.size
    if len(frame) != m * len(omegas):
        raise DimensionMismatch(f"{path} holds {len(frame)} rows, expected {m} x {len(omegas)}")
    first = frame[frame["omega"] == omegas[0]].sort_values("pixel_id")
    if not np.allclose(first[["x_center", "y_center"]].to_numpy(), pixelation.centers, atol=1e-12):
        grid = f"{pixelation.n_grid}x{pixelation.n_grid}"
        raise DimensionMismatch(f"pixel centers in {path} do not match the {grid} grid")
    columns = []
    for omega in omegas:
        part = frame[frame["omega"] == omega].sort_values("pixel_id")
        columns.append(part["re_dgamma"].to_numpy() + 1j * part["im_dgamma"].to_numpy())
    return ImageStack(np.column_stack(columns), np.asarray(omegas, dtype=float), pixelation)


def render_stack(stack: ImageStack, directory: str | Path, stem: str = "image") -> list[Path]:
    """Write one PGM per frequency and part, each normalized to max |value| = 1."""
    out = Path(directory)
    paths = []
    for j, hz in enumerate(stack.frequencies_hz):
        for part in ("re", "im"):
            grid = stack.pixelation.to_grid(stack.normalized(j, part))
            paths.append(write_pgm(grid, out / f"{stem}_{hz:.6g}Hz_{part}.pgm"))
    return paths
