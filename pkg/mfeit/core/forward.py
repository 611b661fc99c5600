"""Time-harmonic forward solvers on crack-conforming meshes.

Two models share one assembly path:

* ``resolved``: the strips are meshed regions carrying gamma_c.
* ``zero_thickness``: each strip collapses to its center segment with duplicated
  nodes; the two sides are coupled by ``kappa * [u][v]`` with
  ``kappa = gamma_c / (2 delta) = gamma_b * lambda_c / (2 delta)``.

The boundary-mean-zero condition is one Lagrange multiplier row; the complex
symmetric saddle system is factorized once per frequency and reused for every
injection.
"""

from __future__ import annotations

# Import built-in modules
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

# Import third-party modules
import numpy as np
import pandas as pd
from loguru import logger
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import gmres, splu

# Import local modules
from mfeit.core.admittivity import Frequency, MaterialSpec, lambda_c
from mfeit.core.geometry import Phantom
from mfeit.core.io import write_table
from mfeit.core.mesh import Interface, Mesh
from mfeit.errors import (
    ConfigError,
    DegenerateContrast,
    DegenerateCoupling,
    SegmentNotFound,
    SolveFailure,
)

Model = Literal["zero_thickness", "resolved"]
RESIDUAL_TOL = 1e-10
EDGE_MASS = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
JUMP = np.array([[-1.0, 0.0, 1.0, 0.0], [0.0, -1.0, 0.0, 1.0]])


@dataclass(frozen=True)
class NeumannCurrent:
    """Boundary current density sampled at the mesh boundary nodes."""

    g: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        g = np.asarray(self.g)
        w = np.asarray(self.weights, dtype=float)
        if g.shape != w.shape:
            raise ConfigError(f"current has {g.shape} samples for {w.shape} boundary weights")
        scale = float(np.max(np.abs(g))) if g.size else 0.0
        if abs(np.sum(w * g)) > 1e-12 * max(scale, 1e-300) * np.sum(w):
            raise ConfigError("boundary current must have zero mean")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "weights", w)

    @property
    def load(self) -> np.ndarray:
        return self.weights * self.g

    @classmethod
    def uniform_field(cls, mesh: Mesh, a: Sequence[float], scale: complex = 1.0) -> NeumannCurrent:
        """``scale * a . nu`` on the boundary circle, with the discrete mean removed."""
        xy = mesh.nodes[mesh.boundary_nodes] / mesh.domain_radius
        g = scale * (xy @ np.asarray(a, dtype=float))
        w = mesh.boundary_weights
        return cls(g - np.sum(w * g) / np.sum(w), w)


@dataclass(frozen=True)
class PotentialField:
    """Nodal potential; duplicated crack nodes carry independent values."""

    u: np.ndarray
    omega: float
    model: str
    mesh: Mesh = field(repr=False)
    phantom: Phantom = field(repr=False)
    current: NeumannCurrent = field(repr=False)
    gamma: np.ndarray = field(repr=False)
    kappa: dict[int, complex] = field(default_factory=dict, repr=False)

    @property
    def boundary_trace(self) -> np.ndarray:
        return self.u[self.mesh.boundary_nodes]

    @property
    def boundary_mean(self) -> complex:
        w = self.mesh.boundary_weights
        return complex(np.sum(w * self.boundary_trace) / np.sum(w))

    def gradients(self) -> np.ndarray:
        """Constant gradient per triangle, shape (T, 2)."""
        return np.einsum("ti,tik->tk", self.u[self.mesh.triangles], basis_gradients(self.mesh))


def basis_gradients(mesh: Mesh) -> np.ndarray:
    """Gradients of the three P1 basis functions of every triangle, shape (T, 3, 2)."""
    p = mesh.nodes[mesh.triangles]
    x, y = p[..., 0], p[..., 1]
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    return np.stack([b, c], axis=2) / (2.0 * mesh.areas)[:, None, None]


def triangle_admittivity(mesh: Mesh, phantom: Phantom, omega: Frequency | float, model: Model) -> np.ndarray:
    m = phantom.materials
    gamma = np.full(mesh.n_triangles, m.gamma_b(omega), dtype=complex)
    gamma[mesh.triangle_disk >= 0] = m.gamma_d(omega)
    if model == "resolved":
        gamma[mesh.triangle_strip >= 0] = m.gamma_c(omega)
    return gamma


def _interface_coo(iface: Interface, kappa: complex, pos: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    ell = np.diff(iface.s)
    dofs = pos[np.column_stack([iface.minus[:-1], iface.minus[1:], iface.plus[:-1], iface.plus[1:]])]
    local = kappa * np.einsum("ai,eab,bj->eij", JUMP, ell[:, None, None] * EDGE_MASS, JUMP)
    return np.repeat(dofs, 4, axis=1).ravel(), np.tile(dofs, (1, 4)).ravel(), local.ravel()


class ForwardSystem:
    """Factorized saddle system for one mesh, admittivity and coupling."""

    def __init__(
        self,
        mesh: Mesh,
        gamma: np.ndarray,
        couplings: dict[int, complex],
        node_map: np.ndarray | None = None,
    ) -> None:
        self.mesh = mesh
        self.gamma = gamma
        self.couplings = couplings
        self.node_map = np.arange(mesh.n_nodes) if node_map is None else node_map
        tris = self.node_map[mesh.triangles]
        used, local = np.unique(tris, return_inverse=True)
        local = local.reshape(tris.shape)
        self.n_dofs = int(used.size)
        self.pos = np.full(mesh.n_nodes, -1, dtype=np.int64)
        self.pos[used] = np.arange(self.n_dofs)

        grads = basis_gradients(mesh)
        vals = np.einsum("tik,tjk->tij", grads, grads) * (mesh.areas * gamma)[:, None, None]
        rows = [np.repeat(local, 3, axis=1).ravel()]
        cols = [np.tile(local, (1, 3)).ravel()]
        data = [vals.ravel()]
        for iface in mesh.interfaces:
            kappa = couplings.get(iface.segment_id, 0.0)
            if kappa != 0.0:
                r, c, v = _interface_coo(iface, kappa, self.pos)
                rows.append(r)
                cols.append(c)
                data.append(v)
        n = self.n_dofs
        stiffness = sparse.coo_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
        ).tocsr()
        n_parts, _ = connected_components(stiffness, directed=False)
        if n_parts > 1:
            raise DegenerateCoupling(f"decoupled interfaces split the domain into {n_parts} pieces")

        self.constraint = np.zeros(n)
        self.constraint[self.pos[mesh.boundary_nodes]] = mesh.boundary_weights
        c = sparse.csr_matrix(self.constraint[:, None])
        self.matrix = sparse.bmat([[stiffness, c], [c.T, None]], format="csc").astype(complex)
        try:
            self.lu = splu(self.matrix)
        except RuntimeError as exc:
            logger.warning(f"Sparse LU failed ({exc}); falling back to GMRES")
            self.lu = None

    def _iterative(self, rhs: np.ndarray) -> np.ndarray:
        out = np.empty_like(rhs)
        for j in range(rhs.shape[1]):
            x, info = gmres(self.matrix, rhs[:, j], rtol=1e-12, atol=0.0, restart=200, maxiter=50)
            if info != 0:
                raise SolveFailure(f"GMRES did not converge (info={info})")
            out[:, j] = x
        return out

    def _check(self, x: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        res = np.linalg.norm(self.matrix @ x - rhs, axis=0)
        ref = np.maximum(np.linalg.norm(rhs, axis=0), np.finfo(float).tiny)
        return res / ref

    def solve_loads(self, loads: np.ndarray) -> np.ndarray:
        """Solve for boundary loads of shape (n_boundary, r); returns nodal values (n_nodes, r)."""
        loads = np.atleast_2d(np.asarray(loads, dtype=complex).T).T
        rhs = np.zeros((self.n_dofs + 1, loads.shape[1]), dtype=complex)
        rhs[self.pos[self.mesh.boundary_nodes]] = loads
        x = self.lu.solve(rhs) if self.lu is not None else self._iterative(rhs)
        rel = self._check(x, rhs)
        if np.any(rel > RESIDUAL_TOL) and self.lu is not None:
            # one step of iterative refinement
            x = x + self.lu.solve(rhs - self.matrix @ x)
            rel = self._check(x, rhs)
        if np.any(rel > RESIDUAL_TOL):
            logger.warning(f"Direct solve residual {rel.max():.3g}; retrying with GMRES")
            x = self._iterative(rhs)
            rel = self._check(x, rhs)
            if np.any(rel > RESIDUAL_TOL):
                raise SolveFailure(f"relative residual {rel.max():.3g} exceeds {RESIDUAL_TOL}")
        logger.debug(f"Solved {loads.shape[1]} right-hand sides, max relative residual {rel.max():.3g}")
        return x[: self.n_dofs][self.pos[self.node_map]]


def couplings_for(phantom: Phantom, omega: Frequency | float) -> dict[int, complex]:
    """Interface coupling ``gamma_c / (2 delta)`` per segment id; zero for a perfect insulator."""
    gamma_c = phantom.materials.gamma_c(omega)
    return {ref.id: gamma_c / (2.0 * ref.insulator.half_thickness) for ref in phantom.segments()}


def factorize(
    mesh: Mesh,
    phantom: Phantom,
    omega: Frequency | float,
    model: Model = "zero_thickness",
    homogeneous: bool = False,
) -> ForwardSystem:
    """Assemble and factorize the system for one frequency.

    Args:
        mesh: Mesh matching the model (resolved strips or duplicated nodes).
        phantom: Phantom providing materials and segments.
        omega: Angular frequency.
        model: ``"zero_thickness"`` or ``"resolved"``.
        homogeneous: Use gamma_b everywhere and merge duplicated nodes.

    Returns:
        ForwardSystem: Reusable factorization.

    """
    w = omega.omega if isinstance(omega, Frequency) else float(omega)
    if homogeneous:
        gamma = np.full(mesh.n_triangles, phantom.materials.gamma_b(w), dtype=complex)
        return ForwardSystem(mesh, gamma, {}, mesh.homogeneous_node_map())
    if model == "resolved":
        if not mesh.resolved:
            raise ConfigError("resolved solves need a mesh built with resolve_strips=True")
        return ForwardSystem(mesh, triangle_admittivity(mesh, phantom, w, model), {})
    if model != "zero_thickness":
        raise ConfigError(f"unknown forward model {model!r}")
    if mesh.resolved or len(mesh.interfaces) != len(phantom.segments()):
        raise ConfigError("zero-thickness solves need crack pairs for every segment")
    return ForwardSystem(mesh, triangle_admittivity(mesh, phantom, w, model), couplings_for(phantom, w))


def solve_with(
    system: ForwardSystem, phantom: Phantom, omega: float, currents: Sequence[NeumannCurrent], model: str
) -> list[PotentialField]:
    loads = np.column_stack([c.load for c in currents])
    u = system.solve_loads(loads)
    return [
        PotentialField(u[:, j], omega, model, system.mesh, phantom, cur, system.gamma, dict(system.couplings))
        for j, cur in enumerate(currents)
    ]


def solve_field(
    mesh: Mesh, phantom: Phantom, omega: Frequency | float, g: NeumannCurrent, model: Model = "zero_thickness"
) -> PotentialField:
    w = omega.omega if isinstance(omega, Frequency) else float(omega)
    return solve_with(factorize(mesh, phantom, w, model), phantom, w, [g], model)[0]


def solve_resolved(mesh: Mesh, phantom: Phantom, omega: Frequency | float, g: NeumannCurrent) -> PotentialField:
    """Solve with every strip resolved as a gamma_c region."""
    return solve_field(mesh, phantom, omega, g, "resolved")


def solve_zero_thickness(
    mesh: Mesh, phantom: Phantom, omega: Frequency | float, g: NeumannCurrent
) -> PotentialField:
    """Solve the effective interface model on a mesh with duplicated crack nodes."""
    return solve_field(mesh, phantom, omega, g, "zero_thickness")


def homogeneous_reference(
    mesh: Mesh, materials: MaterialSpec, omega: Frequency | float, g: NeumannCurrent
) -> PotentialField:
    """Background solution u_0 on the same mesh (duplicated nodes merged)."""
    w = omega.omega if isinstance(omega, Frequency) else float(omega)
    background = Phantom(domain_radius=mesh.domain_radius, materials=materials)
    system = factorize(mesh, background, w, homogeneous=True)
    return solve_with(system, background, w, [g], "homogeneous")[0]


def energy(field: PotentialField) -> complex:
    """Discrete ``int gamma |grad u|^2`` plus the interface term ``kappa |[u]|^2``."""
    grads = field.gradients()
    total = np.sum(field.gamma * field.mesh.areas * np.sum(np.abs(grads) ** 2, axis=1))
    for iface in field.mesh.interfaces:
        kappa = field.kappa.get(iface.segment_id, 0.0)
        if kappa == 0.0:
            continue
        jump = field.u[iface.plus] - field.u[iface.minus]
        pairs = np.column_stack([jump[:-1], jump[1:]])
        mass = np.diff(iface.s)[:, None, None] * EDGE_MASS
        total += kappa * np.sum(np.einsum("ea,eab,eb->e", pairs.conj(), mass, pairs))
    return complex(total)


def boundary_flux_integral(field: PotentialField) -> complex:
    """Discrete ``int g conj(u) ds``."""
    return complex(np.sum(field.current.load * np.conj(field.boundary_trace)))


# -- jump profiles ----------------------------------------------------------------


@dataclass(frozen=True)
class JumpProfile:
    """Jump data along the interior part of one segment."""

    segment_id: int
    s: np.ndarray
    jump_u: np.ndarray
    dnu_plus: np.ndarray
    predicted_jump: np.ndarray
    jump_dnu: np.ndarray
    delta: float
    lambda_c: complex

    @property
    def max_prediction_error(self) -> float:
        return float(np.max(np.abs(self.jump_u - self.predicted_jump))) if self.s.size else 0.0

    @property
    def max_jump_dnu(self) -> float:
        return float(np.max(np.abs(self.jump_dnu))) if self.s.size else 0.0


def _nodal_gradient(field: PotentialField, nodes: np.ndarray, tri_mask: np.ndarray) -> np.ndarray:
    """Area-weighted average of gradients of the selected triangles around each node."""
    mesh = field.mesh
    grads = field.gradients()
    tri_ids = np.flatnonzero(tri_mask)
    incidence = sparse.coo_matrix(
        (np.repeat(mesh.areas[tri_ids], 3), (mesh.triangles[tri_ids].ravel(), np.repeat(np.arange(tri_ids.size), 3))),
        shape=(mesh.n_nodes, tri_ids.size),
    ).tocsr()[nodes]
    weight = np.asarray(incidence.sum(axis=1)).ravel()
    if np.any(weight == 0.0):
        raise SolveFailure("a face node has no adjacent triangle on the requested side")
    return (incidence @ grads[tri_ids]) / weight[:, None]


def jump_profile(field: PotentialField, segment_id: int, c0_fraction: float = 0.1) -> JumpProfile:
    """Potential jump, one-sided normal derivative and their first-order relation.

    Args:
        field: Solution from either forward model.
        segment_id: Segment index as enumerated by ``Phantom.segments()``.
        c0_fraction: Fraction of the segment length excluded at each tip.

    Returns:
        JumpProfile: Samples at the mesh stations of the interior part of the segment.

    Raises:
        SegmentNotFound: Unknown segment id.
        DegenerateContrast: If lambda_c vanishes.

    """
    refs = field.phantom.segments()
    if not 0 <= segment_id < len(refs):
        raise SegmentNotFound(f"segment {segment_id} not in phantom with {len(refs)} segments")
    if not 0.0 <= c0_fraction < 0.5:
        raise ConfigError("c0_fraction must lie in [0, 0.5)")
    ins = refs[segment_id].insulator
    iface = field.mesh.interface(segment_id)
    keep = (iface.s >= c0_fraction * iface.length - 1e-14) & (iface.s <= (1.0 - c0_fraction) * iface.length + 1e-14)
    minus, plus, s = iface.minus[keep], iface.plus[keep], iface.s[keep]

    mesh = field.mesh
    side = ins.signed_distance(mesh.centroids)
    outside = mesh.triangle_strip != segment_id if mesh.resolved else np.ones(mesh.n_triangles, dtype=bool)
    nu = ins.normal
    dnu_minus = _nodal_gradient(field, minus, outside & (side < 0.0)) @ nu
    dnu_plus_side = _nodal_gradient(field, plus, outside & (side > 0.0)) @ nu

    lam = lambda_c(field.omega, field.phantom.materials)
    if lam == 0:
        raise DegenerateContrast("lambda_c = 0: the jump relation is undefined")
    delta = ins.half_thickness
    return JumpProfile(
        segment_id=segment_id,
        s=s,
        jump_u=field.u[plus] - field.u[minus],
        dnu_plus=dnu_minus,
        predicted_jump=(2.0 * delta / lam) * dnu_minus,
        jump_dnu=dnu_plus_side - dnu_minus,
        delta=delta,
        lambda_c=lam,
    )


def export_field(field: PotentialField, path: str | Path) -> tuple[Path, Path]:
    """Write the nodal CSV and the crack-pair side table next to it.

    Returns:
        tuple: Paths of the node table and of ``<stem>_crack_pairs.csv``.

    """
    target = Path(path)
    nodes = pd.DataFrame(
        {
            "node_index": np.arange(field.mesh.n_nodes),
            "x": field.mesh.nodes[:, 0],
            "y": field.mesh.nodes[:, 1],
            "re_u": field.u.real,
            "im_u": field.u.imag,
        }
    )
    pairs = pd.DataFrame(
        [tuple(pair) for pair in field.mesh.crack_pairs],
        columns=["node_minus", "node_plus", "segment_id", "s"],
    )
    side = target.with_name(f"{target.stem}_crack_pairs.csv")
    return write_table(nodes, target), write_table(pairs, side)
