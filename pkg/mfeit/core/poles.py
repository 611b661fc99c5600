"""Meromorphic models and their recovery from samples on a circle.

A model is ``f(x) = sum r_i / (x - p_i) + sum s_j / (x - z_j)**2``: simple poles
at segment endpoints and double poles at disk centers. Recovery works on
contour moments ``mu_m = (1/2 pi i) oint (x/R)^m f(x) dx`` computed by the
trapezoid rule, locates poles from the Hankel pencil of the moments, refines
double poles through the logarithmic derivative ``w'/w`` of the double-pole
part, and polishes everything by nonlinear least squares.
"""

from __future__ import annotations

# Import built-in modules
from collections.abc import Sequence
from dataclasses import dataclass, field
from itertools import combinations

# Import third-party modules
import numpy as np
from loguru import logger
from scipy import linalg
from scipy.optimize import least_squares

# Import local modules
from mfeit.errors import ConfigError, ModelOrderFailure, PoleCollision, PoleEvaluation

POLE_TOL = 1e-9
MIN_SAMPLES = 64


@dataclass(frozen=True)
class MeromorphicModel:
    """Simple poles ``(location, residue)`` and double poles ``(location, strength)``.

    ``strength`` is the coefficient of ``1/(x - z)**2``; a disk coefficient D
    enters with ``strength = -D``.
    """

    simple_poles: tuple[tuple[complex, complex], ...] = ()
    double_poles: tuple[tuple[complex, complex], ...] = ()
    fit_residual: float = field(default=0.0, compare=False)

    @classmethod
    def from_segments(
        cls,
        segments: Sequence[tuple[complex, complex, complex]] = (),
        disks: Sequence[tuple[complex, complex]] = (),
    ) -> MeromorphicModel:
        """Build ``sum C (1/(x-Q) - 1/(x-P)) - sum D/(x-z)**2`` from ``(P, Q, C)`` and ``(z, D)``."""
        simple: list[tuple[complex, complex]] = []
        for p, q, c in segments:
            simple.extend([(complex(q), complex(c)), (complex(p), -complex(c))])
        doubles = tuple((complex(z), -complex(d)) for z, d in disks)
        return cls(tuple(simple), doubles)

    @property
    def locations(self) -> np.ndarray:
        return np.array([p for p, _ in self.simple_poles] + [z for z, _ in self.double_poles], dtype=complex)

    @property
    def order(self) -> int:
        """Number of poles counted with multiplicity."""
        return len(self.simple_poles) + 2 * len(self.double_poles)

    def disk_coefficients(self) -> list[tuple[complex, complex]]:
        return [(z, -s) for z, s in self.double_poles]


def meromorphic_derivative(model: MeromorphicModel, x: complex | np.ndarray) -> complex | np.ndarray:
    """Evaluate ``sum r/(x-p) + sum s/(x-z)**2``.

    Raises:
        PoleEvaluation: If any evaluation point is within 1e-9 of a pole.

    """
    pts = np.asarray(x, dtype=complex)
    locations = model.locations
    if locations.size and np.min(np.abs(pts.reshape(-1, 1) - locations[None, :])) < POLE_TOL:
        raise PoleEvaluation("evaluation point coincides with a pole")
    out = np.zeros(pts.shape, dtype=complex)
    for p, r in model.simple_poles:
        out += r / (pts - p)
    for z, s in model.double_poles:
        out += s / (pts - z) ** 2
    return complex(out) if out.ndim == 0 else out


def contour_points(n: int, radius: float) -> np.ndarray:
    return radius * np.exp(2j * np.pi * np.arange(n) / n)


def contour_moments(samples: np.ndarray, radius: float, count: int) -> np.ndarray:
    """Trapezoid-rule moments ``mu_m = sum_i r_i (p_i / R)**m`` for m < count."""
    x = contour_points(samples.size, radius)
    zeta = x / radius
    return np.array([np.mean(zeta**m * x * samples) for m in range(count)])


def _pencil(mu: np.ndarray, order: int) -> np.ndarray:
    h0 = linalg.hankel(mu[:order], mu[order - 1 : 2 * order - 1])
    h1 = linalg.hankel(mu[1 : order + 1], mu[order : 2 * order])
    try:
        values = linalg.eig(h1, h0, right=False)
    except linalg.LinAlgError as exc:
        raise ModelOrderFailure(f"moment pencil of order {order} is singular: {exc}") from exc
    if not np.all(np.isfinite(values)):
        raise ModelOrderFailure(f"moment pencil of order {order} has infinite eigenvalues")
    return values


def _numerical_rank(mu: np.ndarray, size: int, rank_tol: float) -> int:
    hankel = linalg.hankel(mu[:size], mu[size - 1 : 2 * size - 1])
    s = linalg.svdvals(hankel)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > rank_tol * s[0]))


def _merge_pairs(values: np.ndarray, n_double: int | None, merge_tol: float) -> tuple[list[complex], list[complex]]:
    """Split eigenvalues into simple poles and merged (double) pairs."""
    free = list(range(values.size))
    doubles: list[complex] = []
    pairs = sorted(combinations(range(values.size), 2), key=lambda ij: abs(values[ij[0]] - values[ij[1]]))
    for i, j in pairs:
        if n_double is not None and len(doubles) == n_double:
            break
        if i not in free or j not in free:
            continue
        if n_double is None and abs(values[i] - values[j]) >= merge_tol:
            break
        free.remove(i)
        free.remove(j)
        doubles.append(0.5 * (values[i] + values[j]))
    return [complex(values[i]) for i in free], doubles


def _basis(x: np.ndarray, simple: Sequence[complex], doubles: Sequence[complex]) -> np.ndarray:
    columns = [1.0 / (x - p) for p in simple] + [1.0 / (x - z) ** 2 for z in doubles]
    return np.column_stack(columns) if columns else np.zeros((x.size, 0), dtype=complex)


def fit_coefficients(
    samples: np.ndarray, radius: float, simple: Sequence[complex], doubles: Sequence[complex]
) -> tuple[np.ndarray, np.ndarray]:
    """Linear least squares for residues and strengths at fixed pole locations."""
    x = contour_points(samples.size, radius)
    basis = _basis(x, simple, doubles)
    if basis.shape[1] == 0:
        return np.zeros(0, dtype=complex), np.zeros(0, dtype=complex)
    coef, *_ = linalg.lstsq(basis, samples)
    return coef[: len(simple)], coef[len(simple) :]


def _spectral_derivative(samples: np.ndarray, radius: float) -> np.ndarray:
    """d/dx of a function sampled on the circle, through d/dtheta = i x d/dx."""
    n = samples.size
    k = np.fft.fftfreq(n, d=1.0 / n)
    dtheta = np.fft.ifft(1j * k * np.fft.fft(samples))
    return dtheta / (1j * contour_points(n, radius))


def _refine_doubles(
    samples: np.ndarray, radius: float, simple: Sequence[complex], doubles: list[complex], rank_tol: float
) -> list[complex]:
    """Relocate double poles as the residue -2 poles of ``w'/w``."""
    residues, _ = fit_coefficients(samples, radius, simple, doubles)
    x = contour_points(samples.size, radius)
    w = samples - (_basis(x, simple, []) @ residues if simple else 0.0)
    if np.min(np.abs(w)) == 0.0:
        return doubles
    q = _spectral_derivative(w, radius) / w
    size = 3 * len(doubles)
    nu = contour_moments(q, radius, 2 * size + 1)
    order = max(len(doubles), min(size, _numerical_rank(nu, size, rank_tol)))
    candidates = _pencil(nu, order)
    vander = np.vander(candidates, 2 * order, increasing=True).T
    res, *_ = linalg.lstsq(vander, nu[: 2 * order])
    chosen = np.argsort(np.abs(res + 2.0))[: len(doubles)]
    if np.any(np.abs(res[chosen] + 2.0) > 0.5):
        logger.debug("w'/w refinement found no clean residue -2 poles; keeping pencil estimates")
        return doubles
    refined = [complex(radius * candidates[i]) for i in chosen]
    # keep the pairing with the original estimates
    return [min(refined, key=lambda c, d=d: abs(c - d)) for d in doubles]


def _polish(
    samples: np.ndarray, radius: float, simple: list[complex], doubles: list[complex]
) -> tuple[list[complex], list[complex], np.ndarray, np.ndarray]:
    x = contour_points(samples.size, radius)
    ns, nd = len(simple), len(doubles)
    residues, strengths = fit_coefficients(samples, radius, simple, doubles)
    scale = np.linalg.norm(samples) / np.sqrt(samples.size)

    def unpack(theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        z = theta[0::2] + 1j * theta[1::2]
        return z[: ns + nd], z[ns + nd :]

    def residual(theta: np.ndarray) -> np.ndarray:
        locations, coefs = unpack(theta)
        model = _basis(x, locations[:ns], locations[ns:]) @ coefs
        diff = (model - samples) / scale
        return np.concatenate([diff.real, diff.imag])

    start = np.concatenate([simple, doubles, residues, strengths]).astype(complex)
    theta0 = np.column_stack([start.real, start.imag]).ravel()
    result = least_squares(residual, theta0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
    locations, coefs = unpack(result.x)
    if np.all(np.abs(locations) < radius):
        return list(locations[:ns]), list(locations[ns:]), coefs[:ns], coefs[ns:]
    logger.warning("Least-squares polish moved a pole outside the contour; keeping the linear fit")
    return simple, doubles, residues, strengths


@dataclass(frozen=True)
class PoleConfig:
    """Controls of :func:`recover_poles`.

    ``n_segments``/``n_disks`` fix the model order when given; otherwise the
    order is the numerical rank of the moment Hankel matrix.
    """

    n_segments: int | None = None
    n_disks: int | None = None
    max_poles: int = 12
    rank_tol: float = 1e-8
    tolerance: float = 1e-6
    merge_tol: float = 1e-3
    min_separation: float = 1e-2
    polish: bool = True
    zero_tol: float = 1e-12

    def __post_init__(self) -> None:
        if (self.n_segments is None) != (self.n_disks is None):
            raise ConfigError("give both n_segments and n_disks, or neither")
        if self.max_poles < 1:
            raise ConfigError("max_poles must be positive")


def recover_poles(samples: np.ndarray, radius: float = 1.0, config: PoleConfig | None = None) -> MeromorphicModel:
    """Recover a meromorphic model from samples on the circle ``|x| = radius``.

    Args:
        samples: Values at ``radius * exp(2 pi i j / n)``, ``j = 0..n-1``.
        radius: Contour radius; every pole must lie well inside it.
        config: Model-order hints and tolerances.

    Returns:
        MeromorphicModel: Poles, residues and strengths with the relative fit residual.

    Raises:
        ConfigError: Fewer than 64 samples.
        ModelOrderFailure: No model within ``max_poles`` fits to ``tolerance``.
        PoleCollision: Two recovered poles closer than ``min_separation * radius``.

    """
    cfg = config or PoleConfig()
    f = np.asarray(samples, dtype=complex)
    if f.ndim != 1 or f.size < MIN_SAMPLES:
        raise ConfigError(f"pole recovery needs at least {MIN_SAMPLES} samples on the contour")
    norm = float(np.linalg.norm(f))
    if norm <= cfg.zero_tol * np.sqrt(f.size):
        logger.debug("Contour samples are at the zero level; no poles")
        return MeromorphicModel()

    size = cfg.max_poles + 1
    mu = contour_moments(f, radius, 2 * size + 1)
    if cfg.n_segments is not None:
        order = 2 * cfg.n_segments + 2 * cfg.n_disks
        n_double: int | None = cfg.n_disks
    else:
        order = _numerical_rank(mu, size, cfg.rank_tol)
        n_double = None
    if order > cfg.max_poles:
        raise ModelOrderFailure(f"data need {order} poles, more than max_poles={cfg.max_poles}")
    if order == 0:
        return MeromorphicModel(fit_residual=1.0)
    logger.debug(f"Pole recovery with model order {order}")

    simple, doubles = _merge_pairs(_pencil(mu, order), n_double, cfg.merge_tol)
    simple = [radius * p for p in simple]
    doubles = [radius * z for z in doubles]
    if doubles:
        doubles = _refine_doubles(f, radius, simple, doubles, cfg.rank_tol)
    if cfg.polish:
        simple, doubles, residues, strengths = _polish(f, radius, simple, doubles)
    else:
        residues, strengths = fit_coefficients(f, radius, simple, doubles)

    model = MeromorphicModel(
        tuple(zip(map(complex, simple), map(complex, residues), strict=True)),
        tuple(zip(map(complex, doubles), map(complex, strengths), strict=True)),
    )
    fitted = meromorphic_derivative(model, contour_points(f.size, radius))
    rel = float(np.linalg.norm(fitted - f)) / norm
    model = MeromorphicModel(model.simple_poles, model.double_poles, rel)
    if rel > cfg.tolerance:
        raise ModelOrderFailure(f"best model of order {order} leaves relative residual {rel:.3g} > {cfg.tolerance}")
    locations = model.locations
    for i, j in combinations(range(locations.size), 2):
        if abs(locations[i] - locations[j]) < cfg.min_separation * radius:
            raise PoleCollision(f"poles {locations[i]:.6g} and {locations[j]:.6g} are not resolvable")
    logger.debug(f"Recovered {len(simple)} simple and {len(doubles)} double poles, residual {rel:.3g}")
    return model


def pair_segments(
    model: MeromorphicModel, pair_tol: float = 0.05, n_segments: int | None = None
) -> tuple[list[tuple[complex, complex, complex]], list[tuple[complex, complex]]]:
    """Pair simple poles whose residues cancel into segments ``(P, Q, C)``.

    Returns:
        tuple: Segments with ``Res(Q) = C = -Res(P)`` (C averaged over the two ends) and the unpaired poles.

    """
    poles = list(model.simple_poles)
    mismatch = {
        (i, j): abs(poles[i][1] + poles[j][1]) / max(abs(poles[i][1]), abs(poles[j][1]), 1e-300)
        for i, j in combinations(range(len(poles)), 2)
    }
    used: set[int] = set()
    segments: list[tuple[complex, complex, complex]] = []
    for (i, j), value in sorted(mismatch.items(), key=lambda item: item[1]):
        if n_segments is not None and len(segments) == n_segments:
            break
        if i in used or j in used or (n_segments is None and value > pair_tol):
            continue
        used.update((i, j))
        c = 0.5 * (poles[j][1] - poles[i][1])
        q, p = poles[j][0], poles[i][0]
        # canonical orientation: first nonzero component of C positive
        lead = c.real if abs(c.real) > 1e-12 * abs(c) else c.imag
        if lead < 0:
            p, q, c = q, p, -c
        segments.append((p, q, c))
    unpaired = [poles[i] for i in range(len(poles)) if i not in used]
    return segments, unpaired


def refit_on_poles(model: MeromorphicModel, samples: np.ndarray, radius: float = 1.0) -> MeromorphicModel:
    """Keep the pole locations of ``model`` and refit residues and strengths to other samples."""
    simple = [p for p, _ in model.simple_poles]
    doubles = [z for z, _ in model.double_poles]
    f = np.asarray(samples, dtype=complex)
    residues, strengths = fit_coefficients(f, radius, simple, doubles)
    refit = MeromorphicModel(
        tuple(zip(simple, map(complex, residues), strict=True)),
        tuple(zip(doubles, map(complex, strengths), strict=True)),
    )
    norm = float(np.linalg.norm(f))
    if norm == 0.0:
        return refit
    rel = float(np.linalg.norm(meromorphic_derivative(refit, contour_points(f.size, radius)) - f)) / norm
    return MeromorphicModel(refit.simple_poles, refit.double_poles, rel)
