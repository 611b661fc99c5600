"""Adjacent-pair electrode protocol, frequency sweeps and dataset files.

Electrodes follow the gap model: the injected current density is uniform on
each electrode arc and zero in the gaps; measured voltages are arc averages.
``V[k][j]`` is the voltage read on pair ``j`` while pair ``k`` injects, written
as ``u_k^T f_j`` which equals the energy form ``int gamma grad u_k . grad u_j``.
"""

from __future__ import annotations

# Import built-in modules
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

# Import third-party modules
import numpy as np
import pandas as pd
from loguru import logger

# Import local modules
from mfeit.core.admittivity import Frequency, MaterialSpec
from mfeit.core.forward import Model, NeumannCurrent, factorize
from mfeit.core.geometry import Phantom
from mfeit.core.io import read_table, write_table
from mfeit.core.mesh import Mesh
from mfeit.errors import BadIndex, ConfigError, DimensionMismatch, IOFailure

DATASET_COLUMNS = ["omega", "k", "j", "re_V", "im_V", "masked"]
TRACE_COLUMNS = ["omega", "k", "node", "theta", "re_u", "im_u"]


@dataclass(frozen=True)
class ElectrodeLayout:
    """``n_electrodes`` equally spaced arcs covering ``coverage`` of the circumference."""

    n_electrodes: int = 16
    coverage: float = 0.5
    radius: float = 1.0
    offset: float = 0.0

    def __post_init__(self) -> None:
        if self.n_electrodes < 3:
            raise ConfigError("at least three electrodes are needed")
        if not 0.0 < self.coverage < 1.0:
            raise ConfigError("electrode coverage must lie in (0, 1) so that arcs do not overlap")

    @property
    def pitch(self) -> float:
        return 2.0 * math.pi / self.n_electrodes

    @property
    def width(self) -> float:
        """Angular width of one electrode."""
        return self.coverage * self.pitch

    @property
    def centers(self) -> np.ndarray:
        return self.offset + self.pitch * np.arange(self.n_electrodes)

    def check_index(self, k: int) -> int:
        if not 1 <= k <= self.n_electrodes:
            raise BadIndex(f"electrode index {k} outside 1..{self.n_electrodes}")
        return k

    def next_index(self, k: int) -> int:
        return self.check_index(k) % self.n_electrodes + 1

    def electrode_mask(self, mesh: Mesh, k: int) -> np.ndarray:
        """Boundary nodes lying on electrode ``k`` (1-based)."""
        center = self.centers[self.check_index(k) - 1]
        gap = np.angle(np.exp(1j * (mesh.boundary_angles - center)))
        return np.abs(gap) <= 0.5 * self.width


def make_injection(mesh: Mesh, layout: ElectrodeLayout, k: int) -> NeumannCurrent:
    """Unit current from electrode ``k`` to electrode ``k+1`` (cyclic).

    Args:
        mesh: Mesh whose boundary nodes carry the density.
        layout: Electrode layout.
        k: Injection index, 1-based.

    Returns:
        NeumannCurrent: ``+1/|E_k|`` on E_k, ``-1/|E_{k+1}|`` on E_{k+1}.

    Raises:
        BadIndex: If ``k`` is not in ``1..n_electrodes``.

    """
    w = mesh.boundary_weights
    g = np.zeros(w.size)
    for index, sign in ((k, 1.0), (layout.next_index(k), -1.0)):
        on = layout.electrode_mask(mesh, index)
        if not on.any():
            raise ConfigError(f"electrode {index} holds no boundary node; refine the mesh")
        g[on] = sign / np.sum(w[on])
    return NeumannCurrent(g, w)


def injection_loads(mesh: Mesh, layout: ElectrodeLayout) -> np.ndarray:
    """Boundary load vectors of all injections as columns, shape (n_boundary, N_E)."""
    return np.column_stack([make_injection(mesh, layout, k).load for k in range(1, layout.n_electrodes + 1)])


@dataclass(frozen=True)
class BoundaryDataset:
    """Voltages of one frequency; ``mask[k, j]`` flags entries excluded from fitting."""

    omega: float
    V: np.ndarray
    traces: np.ndarray
    theta: np.ndarray
    mask: np.ndarray | None = None
    meta: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        n = self.V.shape[0]
        if self.V.shape != (n, n):
            raise DimensionMismatch(f"voltage matrix must be square, got {self.V.shape}")
        if self.traces.shape != (n, self.theta.size):
            raise DimensionMismatch(f"traces shape {self.traces.shape} does not match {n} x {self.theta.size}")
        mask = np.zeros((n, n), dtype=bool) if self.mask is None else np.asarray(self.mask, dtype=bool)
        object.__setattr__(self, "mask", mask)

    @property
    def n_electrodes(self) -> int:
        return int(self.V.shape[0])

    @property
    def hz(self) -> float:
        return self.omega / (2.0 * math.pi)

    def reciprocity_error(self) -> float:
        """``max |V - V^T| / max |V|``."""
        scale = float(np.max(np.abs(self.V))) or 1.0
        return float(np.max(np.abs(self.V - self.V.T))) / scale

    def minus(self, reference: BoundaryDataset) -> BoundaryDataset:
        """Perturbation data ``self - reference`` at the same frequency."""
        if not math.isclose(self.omega, reference.omega, rel_tol=1e-12):
            raise DimensionMismatch(f"frequencies differ: {self.omega} vs {reference.omega}")
        if self.V.shape != reference.V.shape or self.theta.shape != reference.theta.shape:
            raise DimensionMismatch("datasets come from different electrode or boundary layouts")
        return replace(
            self,
            V=self.V - reference.V,
            traces=self.traces - reference.traces,
            mask=self.mask | reference.mask,
            meta={**self.meta, "difference": True},
        )


def _sweep_one(
    mesh: Mesh,
    phantom: Phantom,
    layout: ElectrodeLayout,
    loads: np.ndarray,
    omega: float,
    model: Model,
    reference: bool,
) -> BoundaryDataset:
    system = factorize(mesh, phantom, omega, model, homogeneous=reference)
    u = system.solve_loads(loads)
    traces = u[mesh.boundary_nodes].T
    data = BoundaryDataset(
        omega=omega,
        V=traces @ loads,
        traces=traces,
        theta=mesh.boundary_angles.copy(),
        meta={
            "model": "homogeneous" if reference else model,
            "n_electrodes": layout.n_electrodes,
            "coverage": layout.coverage,
            "amplitude": 1.0,
            "reference": reference,
        },
    )
    suffix = " (reference)" if reference else ""
    logger.info(f"Solved {layout.n_electrodes} injections at {omega / (2 * math.pi):.6g} Hz{suffix}")
    return data


def simulate_sweep(
    phantom: Phantom,
    mesh: Mesh,
    layout: ElectrodeLayout,
    frequencies: Sequence[Frequency | float],
    model: Model = "zero_thickness",
    *,
    reference: bool = False,
    workers: int | None = None,
) -> list[BoundaryDataset]:
    """Simulate all adjacent-pair injections at every frequency.

    One factorization per frequency serves all injections; frequencies run
    concurrently on a thread pool.

    Args:
        phantom: Phantom providing geometry and materials.
        mesh: Mesh matching ``model``.
        layout: Electrode layout.
        frequencies: Angular frequencies.
        model: Forward model.
        reference: Solve the homogeneous background instead of the phantom.
        workers: Thread count; ``None`` lets the executor decide.

    Returns:
        list[BoundaryDataset]: One dataset per frequency, in input order.

    """
    omegas = [f.omega if isinstance(f, Frequency) else Frequency(float(f)).omega for f in frequencies]
    loads = injection_loads(mesh, layout)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_sweep_one, mesh, phantom, layout, loads, w, model, reference) for w in omegas]
        return [future.result() for future in futures]


def reference_sweep(
    mesh: Mesh,
    materials: MaterialSpec,
    layout: ElectrodeLayout,
    frequencies: Sequence[Frequency | float],
    **kwargs: Any,
) -> list[BoundaryDataset]:
    background = Phantom(domain_radius=mesh.domain_radius, materials=materials)
    return simulate_sweep(background, mesh, layout, frequencies, reference=True, **kwargs)


def add_noise(dataset: BoundaryDataset, snr_db: float, seed: int | None = None) -> BoundaryDataset:
    """Add complex white Gaussian noise at a per-matrix signal-to-noise ratio.

    Traces receive noise at the same ratio relative to their own power. An
    infinite ``snr_db`` returns the dataset unchanged.

    Args:
        dataset: Clean dataset.
        snr_db: Signal-to-noise ratio in dB.
        seed: Seed of the numpy generator.

    Returns:
        BoundaryDataset: Noisy copy.

    """
    if math.isinf(snr_db) and snr_db > 0:
        return dataset
    if not snr_db > 0.0:
        raise ConfigError(f"snr_db must be positive, got {snr_db}")
    rng = np.random.default_rng(seed)

    def _noisy(values: np.ndarray) -> np.ndarray:
        power = float(np.mean(np.abs(values) ** 2))
        sigma = math.sqrt(power / 10.0 ** (snr_db / 10.0) / 2.0)
        return values + sigma * (rng.standard_normal(values.shape) + 1j * rng.standard_normal(values.shape))

    return replace(
        dataset,
        V=_noisy(dataset.V),
        traces=_noisy(dataset.traces),
        meta={**dataset.meta, "snr_db": snr_db, "seed": seed},
    )


def adjacent_mask(n_electrodes: int) -> np.ndarray:
    k = np.arange(n_electrodes)
    mask = np.zeros((n_electrodes, n_electrodes), dtype=bool)
    for shift in (-1, 0, 1):
        mask[k, (k + shift) % n_electrodes] = True
    return mask


def mask_adjacent(dataset: BoundaryDataset) -> BoundaryDataset:
    """Flag ``V^{k-1,k}``, ``V^{k,k}`` and ``V^{k,k+1}`` for every injection ``k``."""
    return replace(dataset, mask=dataset.mask | adjacent_mask(dataset.n_electrodes))


def uniform_pattern(layout: ElectrodeLayout, a: Sequence[float], scale: complex = 1.0) -> np.ndarray:
    """Injection weights whose combination approximates the current ``scale * a . nu``.

    Electrode ``j`` receives the current the target density carries through its
    pitch sector; the weights are the cumulative sums of those currents, centered.

    Args:
        layout: Electrode layout.
        a: Current direction.
        scale: Complex factor, ``gamma_b(omega)`` for a unit background gradient.

    Returns:
        np.ndarray: Complex weight per injection, length N_E.

    """
    direction = np.asarray(a, dtype=float)
    if direction.shape != (2,) or not np.any(direction):
        raise ConfigError("the current direction must be a nonzero 2-vector")
    half = 0.5 * layout.pitch
    lo, hi = layout.centers - half, layout.centers + half
    r = layout.radius
    # integral of (a . nu) r dtheta over each sector
    current = scale * r * (direction[0] * (np.sin(hi) - np.sin(lo)) - direction[1] * (np.cos(hi) - np.cos(lo)))
    # electrode j collects c_j - c_{j-1}
    weights = np.cumsum(current)
    return weights - weights.mean()


def combine_traces(dataset: BoundaryDataset, weights: np.ndarray) -> np.ndarray:
    """Boundary trace of the injection combination ``sum_k weights[k] u_k``."""
    w = np.asarray(weights)
    if w.shape != (dataset.n_electrodes,):
        raise DimensionMismatch(f"expected {dataset.n_electrodes} weights, got {w.shape}")
    return w @ dataset.traces


# -- files ------------------------------------------------------------------------


def write_dataset(dataset: BoundaryDataset, path: str | Path) -> tuple[Path, Path]:
    """Write ``<stem>.csv`` with the voltages and ``<stem>_traces.csv`` with the traces."""
    target = Path(path)
    n = dataset.n_electrodes
    k, j = np.meshgrid(np.arange(1, n + 1), np.arange(1, n + 1), indexing="ij")
    voltages = pd.DataFrame(
        {
            "omega": dataset.omega,
            "k": k.ravel(),
            "j": j.ravel(),
            "re_V": dataset.V.real.ravel(),
            "im_V": dataset.V.imag.ravel(),
            "masked": dataset.mask.ravel().astype(int),
        }
    )
    n_b = dataset.theta.size
    kk, node = np.meshgrid(np.arange(1, n + 1), np.arange(n_b), indexing="ij")
    traces = pd.DataFrame(
        {
            "omega": dataset.omega,
            "k": kk.ravel(),
            "node": node.ravel(),
            "theta": np.tile(dataset.theta, n),
            "re_u": dataset.traces.real.ravel(),
            "im_u": dataset.traces.imag.ravel(),
        }
    )
    side = target.with_name(f"{target.stem}_traces.csv")
    return write_table(voltages, target), write_table(traces, side)


def read_dataset(path: str | Path, meta: dict[str, Any] | None = None) -> BoundaryDataset:
    """Load a dataset written by :func:`write_dataset`."""
    target = Path(path)
    voltages = read_table(target, DATASET_COLUMNS).sort_values(["k", "j"])
    traces = read_table(target.with_name(f"{target.stem}_traces.csv"), TRACE_COLUMNS).sort_values(["k", "node"])
    n = int(voltages["k"].max())
    n_b = int(traces["node"].max()) + 1
    if len(voltages) != n * n or len(traces) != n * n_b:
        raise IOFailure(f"{target} does not hold a complete {n}-electrode dataset")
    omegas = voltages["omega"].to_numpy()
    if not np.all(omegas == omegas[0]):
        raise IOFailure(f"{target} mixes several frequencies")
    return BoundaryDataset(
        omega=float(omegas[0]),
        V=(voltages["re_V"].to_numpy() + 1j * voltages["im_V"].to_numpy()).reshape(n, n),
        traces=(traces["re_u"].to_numpy() + 1j * traces["im_u"].to_numpy()).reshape(n, n_b),
        theta=traces["theta"].to_numpy()[:n_b],
        mask=voltages["masked"].to_numpy().astype(bool).reshape(n, n),
        meta=dict(meta or {}),
    )
