"""Small-inclusion asymptotics and residue-based detection.

A uniform background current ``gamma_b * a . nu`` produces the reference
potential ``u_0 = a . x``. Thin insulators and small conductive disks perturb
it; at high frequency the boundary perturbation is the real part of a
multivalued function ``G`` whose derivative is meromorphic:

    G(x) = sum_k c_k log((x - Q_k) / (x - P_k)) + sum_k d_k / (x - z_k)

Points are handled as complex numbers ``x1 + i x2`` wherever the formulas are
complex-analytic.
"""

from __future__ import annotations

# Import built-in modules
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any, Literal

# Import third-party modules
import numpy as np
from loguru import logger
from scipy.integrate import trapezoid

# Import local modules
from mfeit.core.admittivity import Frequency, LambdaConvention, lambda_c, lambda_d
from mfeit.core.geometry import Phantom, ThinInsulator
from mfeit.core.poles import MeromorphicModel, PoleConfig, pair_segments, recover_poles, refit_on_poles
from mfeit.core.protocol import BoundaryDataset, ElectrodeLayout, combine_traces, uniform_pattern
from mfeit.errors import ConfigError, DegenerateContrast, IllConditioned

Sign = Literal["plus", "minus"]
Part = Literal["re", "im"]
MAX_CONDITION = 1e12


def _complex_points(x: Any) -> np.ndarray:
    pts = np.asarray(x)
    if np.iscomplexobj(pts):
        return pts.astype(complex)
    pts = pts.astype(float)
    if pts.shape[-1] != 2:
        raise ConfigError(f"points must have a trailing dimension of 2, got shape {pts.shape}")
    return pts[..., 0] + 1j * pts[..., 1]


def _unit(a: Sequence[float]) -> np.ndarray:
    direction = np.asarray(a, dtype=float)
    if direction.shape != (2,) or not np.isclose(np.hypot(*direction), 1.0, atol=1e-9):
        raise ConfigError(f"current direction must be a unit 2-vector, got {a!r}")
    return direction


# -- boundary operator --------------------------------------------------------------


@dataclass(frozen=True)
class SmoothCurve:
    """Quadrature nodes of a closed curve traversed counterclockwise."""

    points: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    curvature: np.ndarray

    @property
    def size(self) -> int:
        return int(self.weights.size)


def ellipse_curve(a: float, b: float, n: int = 256, center: Sequence[float] = (0.0, 0.0)) -> SmoothCurve:
    """Trapezoid nodes of the ellipse with semi-axes ``a`` (along x) and ``b``."""
    if not (a > 0.0 and b > 0.0) or n < 8:
        raise ConfigError("ellipse needs positive semi-axes and at least 8 nodes")
    t = 2.0 * np.pi * np.arange(n) / n
    speed = np.hypot(a * np.sin(t), b * np.cos(t))
    points = np.column_stack([center[0] + a * np.cos(t), center[1] + b * np.sin(t)])
    normals = np.column_stack([b * np.cos(t), a * np.sin(t)]) / speed[:, None]
    return SmoothCurve(points, normals, speed * 2.0 * np.pi / n, a * b / speed**3)


def circle_curve(radius: float = 1.0, n: int = 256, center: Sequence[float] = (0.0, 0.0)) -> SmoothCurve:
    return ellipse_curve(radius, radius, n, center)


def double_layer_matrix(curve: SmoothCurve, adjoint: bool = False) -> np.ndarray:
    """Nystrom matrix of ``K`` (or ``K*`` when ``adjoint``) with the smooth diagonal limit ``kappa/(4 pi)``."""
    diff = curve.points[:, None, :] - curve.points[None, :, :]
    dist2 = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(dist2, 1.0)
    if adjoint:
        numerator = np.einsum("ijk,ik->ij", diff, curve.normals)
    else:
        numerator = -np.einsum("ijk,jk->ij", diff, curve.normals)
    kernel = numerator / (2.0 * np.pi * dist2)
    np.fill_diagonal(kernel, curve.curvature / (4.0 * np.pi))
    return kernel * curve.weights[None, :]


def boundary_operator(
    trace: np.ndarray,
    sign: Sign = "minus",
    method: Literal["closed_form", "quadrature"] = "closed_form",
    radius: float = 1.0,
) -> np.ndarray:
    """Apply ``(-1/2 I + K)`` (``sign="minus"``) or ``(+1/2 I + K)`` to a boundary trace.

    On a circle the double-layer kernel is constant, so ``K`` maps a trace to
    half its mean; the quadrature path evaluates the Nystrom matrix instead.

    Args:
        trace: Samples at equally spaced angles ``2 pi j / n``.
        sign: Sign of the identity term.
        method: "closed_form" or "quadrature".
        radius: Radius of the domain circle.

    Returns:
        np.ndarray: Complex samples of the same length.

    """
    phi = np.asarray(trace, dtype=complex)
    if sign not in ("plus", "minus"):
        raise ConfigError(f"unknown sign {sign!r}")
    half = 0.5 if sign == "plus" else -0.5
    if method == "closed_form":
        return half * phi + 0.5 * phi.mean()
    if method == "quadrature":
        return half * phi + double_layer_matrix(circle_curve(radius, phi.size)) @ phi
    raise ConfigError(f"unknown boundary operator method {method!r}")


# -- polarization tensors ---------------------------------------------------------


@dataclass(frozen=True)
class PolarizationTensor:
    """Symmetric 2x2 complex polarization tensor (units of area)."""

    m: np.ndarray

    def is_symmetric(self, tol: float = 1e-8) -> bool:
        scale = float(np.max(np.abs(self.m))) or 1.0
        return bool(np.max(np.abs(self.m - self.m.T)) <= tol * scale)

    def is_scalar(self, tol: float = 1e-8) -> bool:
        scale = float(np.max(np.abs(self.m))) or 1.0
        return bool(abs(self.m[0, 1]) + abs(self.m[1, 0]) + abs(self.m[0, 0] - self.m[1, 1]) <= tol * scale)


def polarization_disk(lambda_d_value: complex, area: float) -> PolarizationTensor:
    """``(area / lambda_d) I``.

    Raises:
        DegenerateContrast: If ``lambda_d`` is zero.

    """
    if lambda_d_value == 0:
        raise DegenerateContrast("polarization tensor undefined for lambda_d = 0")
    return PolarizationTensor(np.eye(2, dtype=complex) * (area / complex(lambda_d_value)))


def polarization_quadrature(lambda_d_value: complex, curve: SmoothCurve) -> PolarizationTensor:
    """Polarization tensor from the integral equation ``(lambda I - K*) phi_i = nu_i``.

    Args:
        lambda_d_value: Contrast parameter.
        curve: Discretized boundary of the inclusion.

    Returns:
        PolarizationTensor: ``M_ij = int y_j phi_i ds``.

    Raises:
        IllConditioned: If ``lambda`` lies too close to the spectrum of ``K*``.

    """
    system = complex(lambda_d_value) * np.eye(curve.size) - double_layer_matrix(curve, adjoint=True)
    condition = np.linalg.cond(system)
    if not np.isfinite(condition) or condition > MAX_CONDITION:
        raise IllConditioned(f"resolvent at lambda={lambda_d_value} has condition number {condition:.3g}")
    phi = np.linalg.solve(system, curve.normals.astype(complex))
    m = np.einsum("ki,kj,k->ij", phi, curve.points, curve.weights)
    return PolarizationTensor(m)


# -- expansion coefficients -------------------------------------------------------


@dataclass(frozen=True)
class ExpansionCoefficients:
    """Coefficients of the meromorphic functions for one frequency and current direction."""

    a: np.ndarray
    endpoints: np.ndarray
    a_nu: np.ndarray
    a_tau: np.ndarray
    C_re: np.ndarray
    C_im: np.ndarray
    centers: np.ndarray
    D_re: np.ndarray
    D_im: np.ndarray
    lambda_c: complex = 0j
    lambda_d: complex = 0j
    meta: dict[str, Any] = field(default_factory=dict, compare=False)

    def model(self, part: Part = "re") -> MeromorphicModel:
        """Meromorphic model of ``dG/dx`` for the real or imaginary data."""
        c = self.C_re if part == "re" else self.C_im
        d = self.D_re if part == "re" else self.D_im
        segments = [(p, q, ck) for (p, q), ck in zip(self.endpoints, c, strict=True)]
        return MeromorphicModel.from_segments(segments, list(zip(self.centers, d, strict=True)))

    def to_dict(self) -> dict[str, Any]:
        return {
            "a": self.a.tolist(),
            "lambda_c": [self.lambda_c.real, self.lambda_c.imag],
            "lambda_d": [self.lambda_d.real, self.lambda_d.imag],
            "segments": [
                {
                    "P": [p.real, p.imag],
                    "Q": [q.real, q.imag],
                    "a_nu": float(an),
                    "a_tau": float(at),
                    "C_re": [cr.real, cr.imag],
                    "C_im": [ci.real, ci.imag],
                }
                for (p, q), an, at, cr, ci in zip(
                    self.endpoints, self.a_nu, self.a_tau, self.C_re, self.C_im, strict=True
                )
            ],
            "disks": [
                {"z": [z.real, z.imag], "D_re": [dr.real, dr.imag], "D_im": [di.real, di.imag]}
                for z, dr, di in zip(self.centers, self.D_re, self.D_im, strict=True)
            ],
        }


def expansion_coefficients(
    phantom: Phantom,
    omega: Frequency | float,
    a: Sequence[float],
    convention: LambdaConvention = "printed",
) -> ExpansionCoefficients:
    """Segment coefficients ``c_k`` and disk coefficients ``d_k`` for both data parts.

    Args:
        phantom: Phantom with insulating segments and disks.
        omega: Angular frequency.
        a: Unit current direction.
        convention: ``lambda_d`` sign convention.

    Returns:
        ExpansionCoefficients: One entry per segment (frame edges included) and per disk.

    Raises:
        DegenerateContrast: If ``lambda_c`` vanishes.

    """
    direction = _unit(a)
    a_c = complex(direction[0], direction[1])
    lc = lambda_c(omega, phantom.materials)
    if lc == 0:
        raise DegenerateContrast("lambda_c = 0: the insulator admittivity vanishes")
    tangential, normal = lc - 1.0, 1.0 - 1.0 / lc

    refs = phantom.segments()
    endpoints = np.array([(complex(*r.insulator.p), complex(*r.insulator.q)) for r in refs], dtype=complex)
    endpoints = endpoints.reshape(len(refs), 2)
    a_nu = np.array([direction @ r.insulator.normal for r in refs])
    a_tau = np.array([direction @ r.insulator.tangent for r in refs])
    scale = np.array([r.insulator.half_thickness / np.pi for r in refs])
    c_re = scale * (tangential.real * a_tau + 1j * normal.real * a_nu)
    c_im = scale * (tangential.imag * a_tau + 1j * normal.imag * a_nu)

    ld = lambda_d(omega, phantom.materials, convention) if phantom.disks else 0j
    # |B| delta_D^2 / (2 pi lambda_d) with B the unit disk and delta_D the radius
    strength = np.array([disk.radius**2 / (2.0 * ld) for disk in phantom.disks], dtype=complex)
    centers = np.array([complex(*disk.center) for disk in phantom.disks], dtype=complex)
    return ExpansionCoefficients(
        a=direction,
        endpoints=endpoints,
        a_nu=a_nu,
        a_tau=a_tau,
        C_re=c_re.astype(complex),
        C_im=c_im.astype(complex),
        centers=centers,
        D_re=-strength.real * a_c,
        D_im=-strength.imag * a_c,
        lambda_c=complex(lc),
        lambda_d=complex(ld),
        meta={"omega": float(omega.omega if isinstance(omega, Frequency) else omega), "convention": convention},
    )


def meromorphic_potential(coeffs: ExpansionCoefficients, x: Any, part: Part = "re") -> np.ndarray:
    """``G(x)`` with principal-branch logarithms; only its real part is single-valued."""
    z = _complex_points(x)
    c = coeffs.C_re if part == "re" else coeffs.C_im
    d = coeffs.D_re if part == "re" else coeffs.D_im
    out = np.zeros(z.shape, dtype=complex)
    for (p, q), ck in zip(coeffs.endpoints, c, strict=True):
        out += ck * (np.log(z - q) - np.log(z - p))
    for zk, dk in zip(coeffs.centers, d, strict=True):
        out += dk / (z - zk)
    return out


def _disk_term(
    phantom: Phantom, omega: Frequency | float, a: np.ndarray, z: np.ndarray, convention: LambdaConvention
) -> np.ndarray:
    out = np.zeros(z.shape, dtype=complex)
    if not phantom.disks:
        return out
    ld = lambda_d(omega, phantom.materials, convention)
    for disk in phantom.disks:
        tensor = polarization_disk(ld, disk.area)
        w = z - complex(*disk.center)
        rel = np.stack([w.real, w.imag], axis=-1)
        out += -(rel @ (tensor.m @ a)) / (2.0 * np.pi * np.abs(w) ** 2)
    return out


def high_freq_prediction(
    phantom: Phantom,
    omega: Frequency | float,
    a: Sequence[float],
    x: Any,
    convention: LambdaConvention = "printed",
) -> np.ndarray:
    """Leading boundary perturbation ``Phi(x)`` at high frequency.

    Args:
        phantom: Phantom whose inclusions perturb the field.
        omega: Angular frequency.
        a: Unit current direction.
        x: Evaluation points, shape (..., 2) or complex.
        convention: ``lambda_d`` sign convention.

    Returns:
        np.ndarray: Complex ``Phi`` at every point.

    """
    direction = _unit(a)
    z = _complex_points(x)
    lc = lambda_c(omega, phantom.materials)
    if lc == 0:
        raise DegenerateContrast("lambda_c = 0: the insulator admittivity vanishes")
    out = _disk_term(phantom, omega, direction, z, convention)
    for ref in phantom.segments():
        ins = ref.insulator
        p, q = complex(*ins.p), complex(*ins.q)
        ratio = (z - p) / (z - q)
        normal_part = -np.angle(ratio)
        tangent_part = np.log(np.abs(ratio))
        a_nu, a_tau = direction @ ins.normal, direction @ ins.tangent
        weight = -ins.half_thickness / np.pi
        out += weight * ((1.0 - 1.0 / lc) * a_nu * normal_part + (lc - 1.0) * a_tau * tangent_part)
    return out


def segment_dipole_closed_form(segment: ThinInsulator, x: Any) -> np.ndarray:
    """Double-layer potential of unit density on a segment: ``-(1/2 pi) arg((x - P)/(x - Q))``."""
    z = _complex_points(x)
    return -np.angle((z - complex(*segment.p)) / (z - complex(*segment.q))) / (2.0 * np.pi)


def segment_dipole_quadrature(segment: ThinInsulator, s: np.ndarray, density: np.ndarray, x: Any) -> np.ndarray:
    """``(1/2 pi) int <x - y, nu> / |x - y|^2 density(y) ds_y`` by the composite trapezoid rule."""
    pts = np.asarray(x, dtype=float).reshape(-1, 2)
    y = segment.point_at(np.asarray(s, dtype=float))
    diff = pts[:, None, :] - y[None, :, :]
    kernel = (diff @ segment.normal) / (2.0 * np.pi * np.einsum("ijk,ijk->ij", diff, diff))
    values = trapezoid(kernel * np.asarray(density)[None, :], np.asarray(s, dtype=float), axis=1)
    return values.reshape(np.asarray(x).shape[:-1])


def low_freq_prediction(
    phantom: Phantom,
    omega: Frequency | float,
    jump_data: Mapping[int, Any],
    x: Any,
    a: Sequence[float] = (1.0, 0.0),
    convention: LambdaConvention = "printed",
    sign: Sign = "plus",
) -> np.ndarray:
    """Boundary perturbation at low frequency from jump data across the segments.

    Args:
        phantom: Phantom whose disks contribute the polarization term.
        omega: Angular frequency.
        jump_data: Segment id to a jump profile (``s`` and ``jump_u`` attributes) or an ``(s, jump)`` pair.
        x: Evaluation points, shape (..., 2).
        a: Unit current direction.
        convention: ``lambda_d`` sign convention.
        sign: "plus" matches ``(1/2 I + K)`` applied to the solver difference; "minus" negates.

    Returns:
        np.ndarray: Complex prediction per point.

    """
    direction = _unit(a)
    pts = np.asarray(x, dtype=float)
    out = _disk_term(phantom, omega, direction, _complex_points(pts), convention)
    refs = {ref.id: ref for ref in phantom.segments()}
    for segment_id, data in jump_data.items():
        if segment_id not in refs:
            raise ConfigError(f"jump data given for unknown segment {segment_id}")
        s, jump = (data.s, data.jump_u) if hasattr(data, "jump_u") else data
        if np.asarray(s).size < 2:
            continue
        out = out + segment_dipole_quadrature(refs[segment_id].insulator, s, np.asarray(jump, dtype=complex), pts)
    return out if sign == "plus" else -out


# -- detection -------------------------------------------------------------------


def trace_to_derivative(samples: np.ndarray, radius: float = 1.0) -> np.ndarray:
    """Boundary values of ``dG/dx`` from real data ``Re G`` on the circle.

    ``G`` decays at infinity, so the negative Fourier modes of the data carry
    ``G`` itself; they are differentiated term by term.

    Args:
        samples: Real data at angles ``2 pi j / n``; the mean is ignored.
        radius: Circle radius.

    Returns:
        np.ndarray: Complex ``dG/dx`` at the same points.

    """
    h = np.asarray(samples, dtype=float)
    n = h.size
    spectrum = np.fft.fft(h) / n
    modes = np.arange(1, n // 2)
    out = np.zeros(n, dtype=complex)
    out[n - modes - 1] = -(2.0 / radius) * modes * spectrum[n - modes]
    return n * np.fft.ifft(out)


def _xy(value: complex) -> list[float]:
    return [float(np.real(value)), float(np.imag(value))]


@dataclass(frozen=True)
class DetectedSegment:
    p: complex
    q: complex
    c_re: complex
    c_im: complex


@dataclass(frozen=True)
class DetectedDisk:
    z: complex
    d_re: complex
    d_im: complex


@dataclass(frozen=True)
class DetectionReport:
    """Recovered endpoints, centers and coefficients with the relative fit residual."""

    segments: tuple[DetectedSegment, ...]
    disks: tuple[DetectedDisk, ...]
    fit_residual: float
    unpaired: tuple[tuple[complex, complex], ...] = ()
    frequency_hz: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "segments": [
                {"P": _xy(s.p), "Q": _xy(s.q), "C_re": _xy(s.c_re), "C_im": _xy(s.c_im)} for s in self.segments
            ],
            "disks": [{"z": _xy(d.z), "D_re": _xy(d.d_re), "D_im": _xy(d.d_im)} for d in self.disks],
            "unpaired": [{"x": _xy(p), "residue": _xy(r)} for p, r in self.unpaired],
            "fit_residual": float(self.fit_residual),
            "frequency_hz": self.frequency_hz,
        }


def detect_from_derivative(
    derivative_re: np.ndarray,
    derivative_im: np.ndarray,
    radius: float = 1.0,
    config: PoleConfig | None = None,
    frequency_hz: float | None = None,
) -> DetectionReport:
    """Recover segments and disks from samples of ``dG_re/dx`` and ``dG_im/dx``.

    Poles are located on the stronger of the two signals; the other signal is
    refit on the same poles by linear least squares.
    """
    cfg = config or PoleConfig()
    data = {"re": np.asarray(derivative_re, dtype=complex), "im": np.asarray(derivative_im, dtype=complex)}
    primary: Part = "re" if np.linalg.norm(data["re"]) >= np.linalg.norm(data["im"]) else "im"
    secondary: Part = "im" if primary == "re" else "re"
    models = {primary: recover_poles(data[primary], radius, cfg)}
    models[secondary] = refit_on_poles(models[primary], data[secondary], radius)
    logger.debug(
        f"Located poles on the {primary} data; refit residual on {secondary} {models[secondary].fit_residual:.3g}"
    )

    residue = {part: dict(model.simple_poles) for part, model in models.items()}
    pairs, unpaired = pair_segments(models[primary], n_segments=cfg.n_segments)
    segments = tuple(
        DetectedSegment(
            p,
            q,
            0.5 * (residue["re"][q] - residue["re"][p]),
            0.5 * (residue["im"][q] - residue["im"][p]),
        )
        for p, q, _ in pairs
    )
    strengths = {part: dict(model.disk_coefficients()) for part, model in models.items()}
    disks = tuple(DetectedDisk(z, strengths["re"][z], strengths["im"][z]) for z, _ in models[primary].double_poles)
    residual = max(models["re"].fit_residual, models["im"].fit_residual)
    return DetectionReport(segments, disks, residual, tuple(unpaired), frequency_hz)


def detect(
    dataset: BoundaryDataset,
    reference: BoundaryDataset,
    layout: ElectrodeLayout,
    gamma_b: complex,
    a: Sequence[float] = (1.0, 0.0),
    sign: Sign = "plus",
    config: PoleConfig | None = None,
) -> DetectionReport:
    """Identify inclusions from one frequency of multistatic data.

    The injections are combined into a uniform current along ``a``; the
    boundary operator is applied to the perturbation trace and both data parts
    are turned into ``dG/dx`` before pole recovery.

    Args:
        dataset: Measured data with boundary traces.
        reference: Homogeneous reference data at the same frequency.
        layout: Electrode layout used for both datasets.
        gamma_b: Background admittivity at the dataset frequency.
        a: Unit current direction.
        sign: Sign of the identity term of the boundary operator.
        config: Pole recovery controls.

    Returns:
        DetectionReport: Recovered geometry and coefficients.

    Raises:
        ConfigError: If the boundary nodes are not equally spaced from angle zero.
        DetectionFailure: If pole recovery fails.

    """
    direction = _unit(a)
    diff = dataset.minus(reference)
    n = diff.theta.size
    expected = 2.0 * np.pi * np.arange(n) / n
    if np.max(np.abs(np.angle(np.exp(1j * (diff.theta - expected))))) > 1e-9:
        raise ConfigError("detection needs boundary nodes equally spaced from angle zero")
    weights = uniform_pattern(layout, direction, scale=gamma_b)
    phi = boundary_operator(combine_traces(diff, weights), sign=sign, radius=layout.radius)
    logger.info(f"Detecting inclusions at {dataset.hz:.6g} Hz from {n} boundary samples")
    return detect_from_derivative(
        trace_to_derivative(phi.real, layout.radius),
        trace_to_derivative(phi.imag, layout.radius),
        layout.radius,
        config,
        frequency_hz=dataset.hz,
    )
