"""Phantom geometry: thin insulating segments and frames, small conductive disks.

All lengths are in domain units; the domain is the disk of radius ``domain_radius``
centered at the origin.
"""

from __future__ import annotations

# Import built-in modules
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

# Import third-party modules
import numpy as np
import pandas as pd
from loguru import logger

# Import local modules
from mfeit.core.admittivity import MaterialSpec
from mfeit.errors import ConfigError, InvalidGeometry, IOFailure, OutOfDomain, SeparationViolation

Point = tuple[float, float]
BOUNDARY = "boundary"


def _as_point(value: Any) -> Point:
    arr = np.asarray(value, dtype=float).reshape(-1)
    if arr.shape != (2,) or not np.all(np.isfinite(arr)):
        raise InvalidGeometry(f"expected a finite 2D point, got {value!r}")
    return float(arr[0]), float(arr[1])


def _rotate(point: Point, angle: float) -> Point:
    c, s = math.cos(angle), math.sin(angle)
    return c * point[0] - s * point[1], s * point[0] + c * point[1]


@dataclass(frozen=True)
class ThinInsulator:
    """Straight insulating strip of half thickness ``half_thickness`` around segment PQ.

    The unit normal is the tangent P->Q rotated by +90 degrees; the plus side is
    the side the normal points into.
    """

    p: Point
    q: Point
    half_thickness: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "p", _as_point(self.p))
        object.__setattr__(self, "q", _as_point(self.q))
        if self.length <= 0.0:
            raise InvalidGeometry("segment endpoints coincide")
        if not self.half_thickness > 0.0:
            raise InvalidGeometry("half_thickness must be positive")
        if self.half_thickness > self.length / 20.0:
            raise InvalidGeometry(
                f"half_thickness {self.half_thickness:g} exceeds length/20 = {self.length / 20.0:g}"
            )

    @property
    def length(self) -> float:
        return math.hypot(self.q[0] - self.p[0], self.q[1] - self.p[1])

    @property
    def tangent(self) -> np.ndarray:
        return (np.asarray(self.q) - np.asarray(self.p)) / self.length

    @property
    def normal(self) -> np.ndarray:
        t = self.tangent
        return np.array([-t[1], t[0]])

    def point_at(self, s: np.ndarray | float) -> np.ndarray:
        """Points at arclength ``s`` from P."""
        s = np.asarray(s, dtype=float)
        return np.asarray(self.p) + s[..., None] * self.tangent

    def signed_distance(self, x: np.ndarray) -> np.ndarray:
        """Distance from the supporting line, positive on the plus side."""
        return (np.asarray(x, dtype=float) - np.asarray(self.p)) @ self.normal

    def arclength(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - np.asarray(self.p)) @ self.tangent

    def contains(self, x: np.ndarray) -> bool:
        """Point-in-strip test for the rectangle of width 2*delta around PQ."""
        s = float(self.arclength(x))
        return 0.0 <= s <= self.length and abs(float(self.signed_distance(x))) <= self.half_thickness

    def rotated(self, angle: float) -> ThinInsulator:
        return ThinInsulator(_rotate(self.p, angle), _rotate(self.q, angle), self.half_thickness)


@dataclass(frozen=True)
class ConductiveDisk:
    """Small conductive disk ``z + delta_D * B`` with B the unit disk."""

    center: Point
    radius: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", _as_point(self.center))
        if not self.radius > 0.0:
            raise InvalidGeometry("disk radius must be positive")

    @property
    def area(self) -> float:
        return math.pi * self.radius**2

    def contains(self, x: np.ndarray) -> bool:
        return math.hypot(x[0] - self.center[0], x[1] - self.center[1]) <= self.radius

    def rotated(self, angle: float) -> ConductiveDisk:
        return ConductiveDisk(_rotate(self.center, angle), self.radius)


@dataclass(frozen=True)
class InsulatingFrame:
    """Closed convex polygon of thin insulating walls.

    Vertices are stored counterclockwise so that every edge's plus side is the
    enclosed region.
    """

    vertices: tuple[Point, ...]
    half_thickness: float

    def __post_init__(self) -> None:
        verts = [_as_point(v) for v in self.vertices]
        if len(verts) < 3:
            raise InvalidGeometry("a frame needs at least three vertices")
        arr = np.asarray(verts)
        signed_area = 0.5 * np.sum(arr[:, 0] * np.roll(arr[:, 1], -1) - np.roll(arr[:, 0], -1) * arr[:, 1])
        if signed_area < 0.0:
            verts = verts[::-1]
            arr = arr[::-1]
        edges = np.roll(arr, -1, axis=0) - arr
        cross = edges[:, 0] * np.roll(edges[:, 1], -1) - edges[:, 1] * np.roll(edges[:, 0], -1)
        if np.any(cross <= 0.0):
            raise InvalidGeometry("frame polygon must be strictly convex")
        object.__setattr__(self, "vertices", tuple(verts))
        # every edge must satisfy the thin-strip invariant
        self.edges()

    def edges(self) -> list[ThinInsulator]:
        n = len(self.vertices)
        return [ThinInsulator(self.vertices[i], self.vertices[(i + 1) % n], self.half_thickness) for i in range(n)]

    def encloses(self, x: np.ndarray) -> bool:
        return all(float(edge.signed_distance(x)) > 0.0 for edge in self.edges())

    def rotated(self, angle: float) -> InsulatingFrame:
        return InsulatingFrame(tuple(_rotate(v, angle) for v in self.vertices), self.half_thickness)


@dataclass(frozen=True)
class SegmentRef:
    """One insulating segment of a phantom: an open insulator or one frame edge."""

    id: int
    insulator: ThinInsulator
    frame: int | None = None
    edge: int | None = None

    @property
    def closed(self) -> bool:
        return self.frame is not None


@dataclass(frozen=True)
class Phantom:
    """Validated phantom: domain radius, inclusions and materials."""

    domain_radius: float
    insulators: tuple[ThinInsulator, ...] = ()
    disks: tuple[ConductiveDisk, ...] = ()
    materials: MaterialSpec = field(default_factory=MaterialSpec)
    separation: float = 0.1
    frames: tuple[InsulatingFrame, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "insulators", tuple(self.insulators))
        object.__setattr__(self, "disks", tuple(self.disks))
        object.__setattr__(self, "frames", tuple(self.frames))
        if not self.domain_radius > 0.0:
            raise InvalidGeometry("domain_radius must be positive")
        if not self.separation > 0.0:
            raise InvalidGeometry("separation d0 must be positive")
        self.validate()

    @property
    def is_homogeneous(self) -> bool:
        return not (self.insulators or self.disks or self.frames)

    def segments(self) -> list[SegmentRef]:
        """Enumerate insulating segments: open insulators first, then frame edges."""
        refs = [SegmentRef(i, ins) for i, ins in enumerate(self.insulators)]
        for f, frame in enumerate(self.frames):
            for e, edge in enumerate(frame.edges()):
                refs.append(SegmentRef(len(refs), edge, frame=f, edge=e))
        return refs

    def region_of(self, x: np.ndarray) -> str:
        if any(ref.insulator.contains(x) for ref in self.segments()):
            return "insulator"
        if any(disk.contains(x) for disk in self.disks):
            return "disk"
        return "background"

    def labels(self) -> list[str]:
        return (
            [f"C{i + 1}" for i in range(len(self.insulators))]
            + [f"F{i + 1}" for i in range(len(self.frames))]
            + [f"D{i + 1}" for i in range(len(self.disks))]
        )

    def validate(self) -> None:
        """Check containment and the separation constraint.

        Raises:
            OutOfDomain: If an inclusion touches or crosses the boundary.
            SeparationViolation: If any pairwise or boundary distance is below d0.

        """
        report = distance_report(self)
        for row in report.rows:
            if row.second == BOUNDARY and row.distance <= 0.0:
                raise OutOfDomain(f"{row.first} touches the boundary (distance {row.distance:.6g})")
        for row in report.rows:
            if row.distance < self.separation:
                raise SeparationViolation(
                    f"distance {row.first}-{row.second} = {row.distance:.6g} is below d0 = {self.separation:g}"
                )

    def rotated(self, angle: float) -> Phantom:
        """Rigidly rotate every inclusion about the domain center."""
        return Phantom(
            domain_radius=self.domain_radius,
            insulators=tuple(ins.rotated(angle) for ins in self.insulators),
            disks=tuple(disk.rotated(angle) for disk in self.disks),
            materials=self.materials,
            separation=self.separation,
            frames=tuple(frame.rotated(angle) for frame in self.frames),
        )

    def with_materials(self, materials: MaterialSpec) -> Phantom:
        return Phantom(self.domain_radius, self.insulators, self.disks, materials, self.separation, self.frames)


# -- distances -----------------------------------------------------------------


def point_segment_distance(x: Any, p: Any, q: Any) -> float:
    x, p, q = (np.asarray(v, dtype=float) for v in (x, p, q))
    d = q - p
    t = float(np.clip((x - p) @ d / (d @ d), 0.0, 1.0))
    return float(np.hypot(*(x - (p + t * d))))


def _segments_intersect(p1: np.ndarray, q1: np.ndarray, p2: np.ndarray, q2: np.ndarray) -> bool:
    def orient(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> float:
        return float((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))

    o1, o2 = orient(p1, q1, p2), orient(p1, q1, q2)
    o3, o4 = orient(p2, q2, p1), orient(p2, q2, q1)
    return o1 * o2 < 0.0 and o3 * o4 < 0.0


def segment_segment_distance(a: ThinInsulator, b: ThinInsulator) -> float:
    p1, q1, p2, q2 = (np.asarray(v) for v in (a.p, a.q, b.p, b.q))
    if _segments_intersect(p1, q1, p2, q2):
        return 0.0
    return min(
        point_segment_distance(p1, p2, q2),
        point_segment_distance(q1, p2, q2),
        point_segment_distance(p2, p1, q1),
        point_segment_distance(q2, p1, q1),
    )


def _walls(item: ThinInsulator | InsulatingFrame) -> list[ThinInsulator]:
    return item.edges() if isinstance(item, InsulatingFrame) else [item]


def _pair_distance(a: Any, b: Any) -> float:
    if isinstance(a, ConductiveDisk) and isinstance(b, ConductiveDisk):
        gap = math.hypot(a.center[0] - b.center[0], a.center[1] - b.center[1]) - a.radius - b.radius
        return max(0.0, gap)
    if isinstance(a, ConductiveDisk):
        a, b = b, a
    if isinstance(b, ConductiveDisk):
        return max(0.0, min(point_segment_distance(b.center, w.p, w.q) for w in _walls(a)) - b.radius)
    return min(segment_segment_distance(wa, wb) for wa in _walls(a) for wb in _walls(b))


def _boundary_distance(item: Any, radius: float) -> float:
    if isinstance(item, ConductiveDisk):
        return radius - math.hypot(*item.center) - item.radius
    # the norm is convex, so its maximum over a segment sits at an endpoint
    points = item.vertices if isinstance(item, InsulatingFrame) else (item.p, item.q)
    return radius - max(math.hypot(*pt) for pt in points)


@dataclass(frozen=True)
class DistanceRow:
    first: str
    second: str
    distance: float


@dataclass(frozen=True)
class DistanceReport:
    """Pairwise inclusion distances and inclusion-to-boundary distances."""

    rows: tuple[DistanceRow, ...]

    def get(self, first: str, second: str) -> float:
        for row in self.rows:
            if {row.first, row.second} == {first, second}:
                return row.distance
        raise KeyError(f"no distance entry for {first}-{second}")

    def minimum(self) -> float:
        return min((row.distance for row in self.rows), default=math.inf)

    def to_frame(self) -> pd.DataFrame:
        rows = [(r.first, r.second, r.distance) for r in self.rows]
        return pd.DataFrame(rows, columns=["first", "second", "distance"])

    def as_matrix(self) -> pd.DataFrame:
        """Symmetric table indexed by inclusion label (boundary included)."""
        names = sorted({r.first for r in self.rows} | {r.second for r in self.rows})
        table = pd.DataFrame(np.zeros((len(names), len(names))), index=names, columns=names)
        for r in self.rows:
            table.loc[r.first, r.second] = r.distance
            table.loc[r.second, r.first] = r.distance
        return table


def distance_report(phantom: Phantom) -> DistanceReport:
    """Exact Euclidean distances between all inclusions and to the boundary.

    Segments are measured along their center lines; a frame counts as the union of its edges.

    Args:
        phantom: Phantom to measure.

    Returns:
        DistanceReport: One row per unordered inclusion pair plus one boundary row per inclusion.

    """
    items: list[Any] = [*phantom.insulators, *phantom.frames, *phantom.disks]
    labels = phantom.labels()
    rows: list[DistanceRow] = []
    for i, a in enumerate(items):
        for j in range(i + 1, len(items)):
            rows.append(DistanceRow(labels[i], labels[j], _pair_distance(a, items[j])))
        rows.append(DistanceRow(labels[i], BOUNDARY, _boundary_distance(a, phantom.domain_radius)))
    return DistanceReport(tuple(rows))


# -- phantom specifications -----------------------------------------------------


@dataclass(frozen=True)
class PhantomSpec:
    """Parsed PhantomSpec JSON document."""

    domain_radius: float = 1.0
    d0: float = 0.1
    materials: dict[str, float] = field(default_factory=dict)
    insulators: tuple[dict[str, Any], ...] = ()
    disks: tuple[dict[str, Any], ...] = ()
    frames: tuple[dict[str, Any], ...] = ()
    check_regime: bool = True

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> PhantomSpec:
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown phantom keys: {sorted(unknown)}")
        try:
            return cls(
                domain_radius=float(data.get("domain_radius", 1.0)),
                d0=float(data.get("d0", 0.1)),
                materials=dict(data.get("materials", {})),
                insulators=tuple(dict(item) for item in data.get("insulators", [])),
                disks=tuple(dict(item) for item in data.get("disks", [])),
                frames=tuple(dict(item) for item in data.get("frames", [])),
                check_regime=bool(data.get("check_regime", True)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"malformed phantom spec: {exc}") from exc

    def to_dict(self) -> dict[str, Any]:
        return {
            "domain_radius": self.domain_radius,
            "d0": self.d0,
            "materials": dict(self.materials),
            "insulators": [dict(item) for item in self.insulators],
            "disks": [dict(item) for item in self.disks],
            "frames": [dict(item) for item in self.frames],
            "check_regime": self.check_regime,
        }


def load_phantom_spec(path: str | Path) -> PhantomSpec:
    """Read a PhantomSpec JSON file."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IOFailure(f"cannot read phantom spec {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"phantom spec {path} is not valid JSON: {exc}") from exc
    return PhantomSpec.from_dict(data)


def build_phantom(spec: PhantomSpec) -> Phantom:
    """Validate a PhantomSpec and build the Phantom.

    Args:
        spec: Parsed specification.

    Returns:
        Phantom: Validated phantom.

    Raises:
        SeparationViolation: If inclusions are closer than d0.
        OutOfDomain: If an inclusion touches the boundary.

    """
    materials = MaterialSpec.from_dict(spec.materials)
    if spec.check_regime:
        materials.check_regime()
    try:
        insulators = tuple(ThinInsulator(item["p"], item["q"], float(item["delta"])) for item in spec.insulators)
        disks = tuple(ConductiveDisk(item["center"], float(item["radius"])) for item in spec.disks)
        frames = tuple(InsulatingFrame(tuple(item["vertices"]), float(item["delta"])) for item in spec.frames)
    except KeyError as exc:
        raise ConfigError(f"phantom spec entry is missing {exc}") from exc
    phantom = Phantom(
        domain_radius=spec.domain_radius,
        insulators=insulators,
        disks=disks,
        materials=materials,
        separation=spec.d0,
        frames=frames,
    )
    logger.debug(
        f"Built phantom with {len(insulators)} insulators, {len(frames)} frames and {len(disks)} disks"
    )
    return phantom


def phantom_to_spec(phantom: Phantom, check_regime: bool = True) -> PhantomSpec:
    return PhantomSpec(
        domain_radius=phantom.domain_radius,
        d0=phantom.separation,
        materials=phantom.materials.to_dict(),
        insulators=tuple(
            {"p": list(ins.p), "q": list(ins.q), "delta": ins.half_thickness} for ins in phantom.insulators
        ),
        disks=tuple({"center": list(d.center), "radius": d.radius} for d in phantom.disks),
        frames=tuple(
            {"vertices": [list(v) for v in f.vertices], "delta": f.half_thickness} for f in phantom.frames
        ),
        check_regime=check_regime,
    )


# Visually matched layouts: two strips shielding two conductors, and a conductor inside a frame.
BUILTIN_PHANTOMS: dict[str, dict[str, Any]] = {
    "homogeneous": {"domain_radius": 1.0, "d0": 0.1},
    "parallel_strips": {
        "domain_radius": 1.0,
        "d0": 0.1,
        "insulators": [
            {"p": [-0.5, 0.3], "q": [0.5, 0.3], "delta": 5.0e-4},
            {"p": [0.5, -0.3], "q": [-0.5, -0.3], "delta": 5.0e-4},
        ],
        "disks": [{"center": [-0.25, 0.0], "radius": 0.08}, {"center": [0.25, 0.0], "radius": 0.08}],
    },
    "framed_disk": {
        "domain_radius": 1.0,
        "d0": 0.1,
        "disks": [{"center": [-0.45, 0.0], "radius": 0.08}, {"center": [0.3, 0.0], "radius": 0.08}],
        "frames": [{"vertices": [[0.05, -0.25], [0.55, -0.25], [0.55, 0.25], [0.05, 0.25]], "delta": 5.0e-4}],
    },
}


def builtin_phantom_spec(name: str) -> PhantomSpec:
    try:
        return PhantomSpec.from_dict(BUILTIN_PHANTOMS[name])
    except KeyError as exc:
        raise ConfigError(f"unknown built-in phantom {name!r}; choose from {sorted(BUILTIN_PHANTOMS)}") from exc
