"""Crack-conforming triangulation of the phantom domain.

The mesher builds a planar straight line graph (boundary circle, insulating
segments, frame edges and disk polygons) and hands it to Triangle with Steiner
points forbidden on input segments, so every segment lies on element edges and
its points keep their input indices. In zero-thickness mode the interior nodes
of each segment are duplicated: triangles on the plus side reference the copy.
In resolved mode each strip is meshed as three element layers across 2*delta.
"""

from __future__ import annotations

# Import built-in modules
import math
from dataclasses import dataclass, field
from typing import NamedTuple

# Import third-party modules
import numpy as np
import triangle
from loguru import logger

# Import local modules
from mfeit.core.geometry import Phantom, ThinInsulator
from mfeit.core.pixels import Pixelation
from mfeit.core.retry import attempts_over
from mfeit.errors import ConfigError, MeshFailure, SegmentNotFound

FRAME_TAG = 10_000
STRIP_TAG = 20_000
DEFAULT_MIN_ANGLES = (30.0, 25.0, 20.0)


class CrackPair(NamedTuple):
    node_minus: int
    node_plus: int
    segment_id: int
    s: float


@dataclass(frozen=True)
class Interface:
    """Ordered node lists along one segment.

    In zero-thickness meshes ``minus``/``plus`` are the two copies of the segment
    nodes (equal at open tips). In resolved meshes they are the nodes of the two
    strip faces at offsets -delta and +delta.
    """

    segment_id: int
    minus: np.ndarray
    plus: np.ndarray
    s: np.ndarray
    length: float
    closed: bool = False


@dataclass(frozen=True)
class Mesh:
    """Immutable triangulation with interface bookkeeping."""

    nodes: np.ndarray
    triangles: np.ndarray
    crack_pairs: tuple[CrackPair, ...]
    boundary_nodes: np.ndarray
    boundary_weights: np.ndarray
    interfaces: tuple[Interface, ...]
    triangle_disk: np.ndarray
    triangle_strip: np.ndarray
    pixelation: Pixelation
    pixel_map: np.ndarray
    h: float
    domain_radius: float
    resolved: bool = False
    areas: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        p = self.nodes
        t = self.triangles
        areas = 0.5 * (
            (p[t[:, 1], 0] - p[t[:, 0], 0]) * (p[t[:, 2], 1] - p[t[:, 0], 1])
            - (p[t[:, 1], 1] - p[t[:, 0], 1]) * (p[t[:, 2], 0] - p[t[:, 0], 0])
        )
        object.__setattr__(self, "areas", areas)
        for name in ("nodes", "triangles", "boundary_nodes", "boundary_weights", "triangle_disk",
                     "triangle_strip", "pixel_map", "areas"):
            getattr(self, name).setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return int(self.nodes.shape[0])

    @property
    def n_triangles(self) -> int:
        return int(self.triangles.shape[0])

    @property
    def boundary_edges(self) -> list[tuple[int, int]]:
        b = self.boundary_nodes
        return [(int(b[i]), int(b[(i + 1) % b.size])) for i in range(b.size)]

    @property
    def boundary_angles(self) -> np.ndarray:
        xy = self.nodes[self.boundary_nodes]
        return np.mod(np.arctan2(xy[:, 1], xy[:, 0]), 2.0 * np.pi)

    @property
    def polygon_area(self) -> float:
        xy = self.nodes[self.boundary_nodes]
        return float(0.5 * np.sum(xy[:, 0] * np.roll(xy[:, 1], -1) - np.roll(xy[:, 0], -1) * xy[:, 1]))

    @property
    def centroids(self) -> np.ndarray:
        return self.nodes[self.triangles].mean(axis=1)

    def homogeneous_node_map(self) -> np.ndarray:
        """Map every plus copy back to its minus twin; identity elsewhere."""
        node_map = np.arange(self.n_nodes)
        for pair in self.crack_pairs:
            node_map[pair.node_plus] = pair.node_minus
        return node_map

    def interface(self, segment_id: int) -> Interface:
        for item in self.interfaces:
            if item.segment_id == segment_id:
                return item
        raise SegmentNotFound(f"mesh has no interface for segment {segment_id}")


# -- planar straight line graph ---------------------------------------------------


def boundary_node_count(radius: float, h: float) -> int:
    """Nodes on the boundary circle: spacing at most h, chord error at most h**2, multiple of 64."""
    by_spacing = 2.0 * math.pi * radius / h
    by_chord = math.pi / math.acos(max(-1.0, 1.0 - h * h / radius))
    return 64 * math.ceil(max(by_spacing, by_chord) / 64.0)


def segment_stations(length: float, h: float) -> np.ndarray:
    """Arclength stations along a segment, graded 4:1 toward both tips."""
    if length < 3.0 * h:
        n = max(4, math.ceil(4.0 * length / h))
        return np.linspace(0.0, length, n + 1)
    n = max(1, math.ceil((length - 1.5 * h) / h))
    core = np.linspace(0.75 * h, length - 0.75 * h, n + 1)
    return np.concatenate([[0.0, 0.25 * h], core, [length - 0.25 * h, length]])


class _Pslg:
    def __init__(self) -> None:
        self.vertices: list[tuple[float, float]] = []
        self.segments: list[tuple[int, int]] = []
        self.regions: list[tuple[float, float, float, float]] = []

    def add_chain(self, points: np.ndarray, closed: bool = False) -> np.ndarray:
        start = len(self.vertices)
        self.vertices.extend((float(x), float(y)) for x, y in points)
        ids = np.arange(start, len(self.vertices))
        self.segments.extend(zip(ids[:-1].tolist(), ids[1:].tolist(), strict=True))
        if closed:
            self.segments.append((int(ids[-1]), int(ids[0])))
        return ids

    def add_region(self, point: np.ndarray, attribute: int) -> None:
        self.regions.append((float(point[0]), float(point[1]), float(attribute), 0.0))


@dataclass
class _Layout:
    pslg: _Pslg
    n_boundary: int
    open_chains: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    frame_chains: list[list[tuple[np.ndarray, np.ndarray]]] = field(default_factory=list)
    strip_faces: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = field(default_factory=list)


def _strip_lines(pslg: _Pslg, ins: ThinInsulator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    delta = ins.half_thickness
    n = math.ceil(ins.length / (2.0 * delta / 3.0))
    s = np.linspace(0.0, ins.length, n + 1)
    base = ins.point_at(s)
    lines = {}
    for offset in (-delta, -delta / 3.0, delta / 3.0, delta):
        lines[offset] = pslg.add_chain(base + offset * ins.normal)
    offsets = sorted(lines)
    for end in (0, -1):
        for lower, upper in zip(offsets[:-1], offsets[1:], strict=True):
            pslg.segments.append((int(lines[lower][end]), int(lines[upper][end])))
    return lines[-delta], lines[delta], s


def _build_layout(phantom: Phantom, h: float, resolve_strips: bool) -> _Layout:
    pslg = _Pslg()
    radius = phantom.domain_radius
    n_b = boundary_node_count(radius, h)
    theta = 2.0 * np.pi * np.arange(n_b) / n_b
    pslg.add_chain(radius * np.column_stack([np.cos(theta), np.sin(theta)]), closed=True)
    layout = _Layout(pslg, n_b)

    for k, ins in enumerate(phantom.insulators):
        mid = 0.5 * (np.asarray(ins.p) + np.asarray(ins.q))
        if resolve_strips:
            minus, plus, s = _strip_lines(pslg, ins)
            layout.strip_faces.append((minus, plus, s))
            for offset in (0.0, -2.0 * ins.half_thickness / 3.0, 2.0 * ins.half_thickness / 3.0):
                pslg.add_region(mid + offset * ins.normal, STRIP_TAG + k)
        else:
            s = segment_stations(ins.length, h)
            layout.open_chains.append((pslg.add_chain(ins.point_at(s)), s))

    for f, frame in enumerate(phantom.frames):
        verts = np.asarray(frame.vertices)
        ring: list[int] = []
        chains: list[tuple[np.ndarray, np.ndarray]] = []
        for edge in frame.edges():
            n = max(4, math.ceil(2.0 * edge.length / h))
            s = np.linspace(0.0, edge.length, n + 1)
            start = len(pslg.vertices)
            pts = edge.point_at(s[:-1])
            pslg.vertices.extend((float(x), float(y)) for x, y in pts)
            ring.extend(range(start, start + pts.shape[0]))
            chains.append((np.arange(start, start + pts.shape[0] + 1), s))
        ring_arr = np.asarray(ring)
        # close each edge chain on the next edge's first vertex
        fixed = []
        for e, (ids, s) in enumerate(chains):
            nxt = chains[(e + 1) % len(chains)][0][0]
            ids = ids.copy()
            ids[-1] = nxt
            fixed.append((ids, s))
        pslg.segments.extend(zip(ring_arr.tolist(), np.roll(ring_arr, -1).tolist(), strict=True))
        layout.frame_chains.append(fixed)
        centroid = verts.mean(axis=0)
        toward = centroid - verts[0]
        pslg.add_region(verts[0] + 0.5 * phantom.separation * toward / np.hypot(*toward), FRAME_TAG + f)

    for d, disk in enumerate(phantom.disks):
        n = max(16, math.ceil(2.0 * math.pi * disk.radius / (0.25 * h)))
        phi = 2.0 * np.pi * np.arange(n) / n
        ring_pts = np.asarray(disk.center) + disk.radius * np.column_stack([np.cos(phi), np.sin(phi)])
        pslg.add_chain(ring_pts, closed=True)
        pslg.add_region(np.asarray(disk.center), d + 1)
    return layout


# -- triangulation ----------------------------------------------------------------


def _orient_ccw(nodes: np.ndarray, tris: np.ndarray) -> np.ndarray:
    a, b, c = nodes[tris[:, 0]], nodes[tris[:, 1]], nodes[tris[:, 2]]
    two_area = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    tris = tris.copy()
    flip = two_area < 0.0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    return tris


def _triangulate(layout: _Layout, h: float, min_angle: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    pslg = layout.pslg
    vertices = np.asarray(pslg.vertices, dtype=float)
    data: dict[str, np.ndarray] = {"vertices": vertices, "segments": np.asarray(pslg.segments, dtype=np.int32)}
    if pslg.regions:
        data["regions"] = np.asarray(pslg.regions, dtype=float)
    max_area = math.sqrt(3.0) / 4.0 * h * h
    opts = f"pq{min_angle:g}YYAQa{max_area:.12g}"
    try:
        result = triangle.triangulate(data, opts)
    except Exception as exc:  # noqa: BLE001
        raise MeshFailure(f"Triangle failed with options {opts!r}: {exc}") from exc
    nodes = np.asarray(result.get("vertices"), dtype=float)
    tris = np.asarray(result.get("triangles"), dtype=np.int64)
    if nodes.ndim != 2 or tris.ndim != 2 or tris.size == 0:
        raise MeshFailure("Triangle returned an empty mesh")
    if nodes.shape[0] < vertices.shape[0] or not np.array_equal(nodes[: vertices.shape[0]], vertices):
        raise MeshFailure("Triangle did not preserve the input vertex numbering")
    attrs = result.get("triangle_attributes")
    if attrs is None:
        tags = np.zeros(tris.shape[0], dtype=np.int64)
    else:
        tags = np.rint(np.asarray(attrs)[:, 0]).astype(np.int64)

    tris = _orient_ccw(nodes, tris)
    a, b, c = nodes[tris[:, 0]], nodes[tris[:, 1]], nodes[tris[:, 2]]
    area = 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))
    if np.any(area <= 1e-12 * h * h):
        raise MeshFailure(f"{int(np.sum(area <= 1e-12 * h * h))} degenerate triangles at minimum angle {min_angle}")

    edges = {tuple(sorted(e)) for e in np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]]).tolist()}
    missing = [s for s in pslg.segments if tuple(sorted(s)) not in edges]
    if missing:
        raise MeshFailure(f"{len(missing)} input segments are not element edges")
    return nodes, tris, tags


def _boundary_weights(xy: np.ndarray) -> np.ndarray:
    lengths = np.hypot(*(np.roll(xy, -1, axis=0) - xy).T)
    return 0.5 * (lengths + np.roll(lengths, 1))


def mesh_domain(
    phantom: Phantom,
    h: float,
    *,
    resolve_strips: bool = False,
    min_angles: tuple[float, ...] = DEFAULT_MIN_ANGLES,
    pixelation: Pixelation | None = None,
) -> Mesh:
    """Triangulate the domain conforming to every inclusion.

    Args:
        phantom: Validated phantom.
        h: Target edge length away from inclusions.
        resolve_strips: Mesh the insulating strips as thick regions instead of duplicating nodes.
        min_angles: Minimum-angle constraints tried in order until the quality checks pass.
        pixelation: Pixel grid for ``pixel_map``; defaults to 32x32 over the domain.

    Returns:
        Mesh: Immutable mesh.

    Raises:
        ConfigError: If ``h`` is outside (0, radius/4).
        MeshFailure: If every attempt fails the quality checks.

    """
    radius = phantom.domain_radius
    if not 0.0 < h < radius / 4.0:
        raise ConfigError(f"mesh size h={h} must lie in (0, {radius / 4.0})")
    if resolve_strips and phantom.frames:
        raise MeshFailure("resolved strips are built for open segments only")
    layout = _build_layout(phantom, h, resolve_strips)
    for attempt, angle in attempts_over(tuple(min_angles), MeshFailure, "triangulation"):
        with attempt:
            nodes, tris, tags = _triangulate(layout, h, angle)

    pixelation = pixelation or Pixelation(32, radius)
    if not math.isclose(pixelation.radius, radius):
        raise ConfigError("pixelation radius differs from the domain radius")
    triangle_disk = np.where((tags >= 1) & (tags < FRAME_TAG), tags - 1, -1)
    triangle_strip = np.where(tags >= STRIP_TAG, tags - STRIP_TAG, -1)

    interfaces: list[Interface] = []
    pairs: list[CrackPair] = []
    extra: list[np.ndarray] = []
    n_copies = sum(ids.size for ids, _ in layout.open_chains) + sum(
        ids.size for chains in layout.frame_chains for ids, _ in chains
    )
    remap = np.arange(nodes.shape[0] + n_copies)
    next_id = nodes.shape[0]
    segment_refs = phantom.segments()

    if resolve_strips:
        for k, (minus, plus, s) in enumerate(layout.strip_faces):
            interfaces.append(Interface(k, minus.copy(), plus.copy(), s.copy(), phantom.insulators[k].length))
    else:
        centroids = nodes[tris].mean(axis=1)
        for k, (ids, s) in enumerate(layout.open_chains):
            ins = phantom.insulators[k]
            interior = ids[1:-1]
            copies = np.arange(next_id, next_id + interior.size)
            next_id += interior.size
            extra.append(nodes[interior])
            remap[interior] = copies
            touched = np.isin(tris, interior).any(axis=1)
            rows = np.flatnonzero(touched & (ins.signed_distance(centroids) > 0.0))
            tris[rows] = np.where(np.isin(tris[rows], interior), remap[tris[rows]], tris[rows])
            plus = np.concatenate([[ids[0]], copies, [ids[-1]]])
            interfaces.append(Interface(k, ids.copy(), plus, s.copy(), ins.length))
            pairs.extend(
                CrackPair(int(m), int(p), k, float(t)) for m, p, t in zip(interior, copies, s[1:-1], strict=True)
            )

        frame_refs = [ref for ref in segment_refs if ref.closed]
        for f, chains in enumerate(layout.frame_chains):
            ring = np.unique(np.concatenate([ids for ids, _ in chains]))
            copies = np.arange(next_id, next_id + ring.size)
            next_id += ring.size
            extra.append(nodes[ring])
            remap[ring] = copies
            rows = np.flatnonzero(np.isin(tris, ring).any(axis=1) & (tags == FRAME_TAG + f))
            tris[rows] = np.where(np.isin(tris[rows], ring), remap[tris[rows]], tris[rows])
            for e, (ids, s) in enumerate(chains):
                ref = next(r for r in frame_refs if r.frame == f and r.edge == e)
                interfaces.append(Interface(ref.id, ids.copy(), remap[ids], s.copy(), ref.insulator.length, True))
                pairs.extend(
                    CrackPair(int(m), int(remap[m]), ref.id, float(t))
                    for m, t in zip(ids[:-1], s[:-1], strict=True)
                )

    if extra:
        nodes = np.vstack([nodes, *extra])
    boundary = np.arange(layout.n_boundary)
    centroids = nodes[tris].mean(axis=1)
    pixel_map = pixelation.locate(centroids)
    mesh = Mesh(
        nodes=nodes,
        triangles=tris,
        crack_pairs=tuple(pairs),
        boundary_nodes=boundary,
        boundary_weights=_boundary_weights(nodes[boundary]),
        interfaces=tuple(interfaces),
        triangle_disk=triangle_disk,
        triangle_strip=triangle_strip,
        pixelation=pixelation,
        pixel_map=pixel_map,
        h=h,
        domain_radius=radius,
        resolved=resolve_strips,
    )
    logger.info(
        f"Mesh built: {mesh.n_nodes} nodes, {mesh.n_triangles} triangles, "
        f"{len(mesh.crack_pairs)} crack pairs, {layout.n_boundary} boundary nodes"
    )
    return mesh
