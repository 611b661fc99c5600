"""Frequency-dependent complex material model.

The admittivity of each region is ``gamma = sigma + i*omega*eps``. Thin insulators
are described through the ratio ``lambda_c = gamma_c / gamma_b`` and small
conductors through ``lambda_d``.
"""

from __future__ import annotations

# Import built-in modules
import math
from dataclasses import asdict, dataclass
from typing import TYPE_CHECKING, Any, Literal

# Import third-party modules
import numpy as np

# Import local modules
from mfeit.errors import ConfigError, DegenerateContrast, InvalidMaterials, OutOfDomain

if TYPE_CHECKING:
    from mfeit.core.geometry import Phantom

MAX_FREQUENCY_HZ = 1.0e6
LambdaConvention = Literal["printed", "conjugate"]


@dataclass(frozen=True)
class MaterialSpec:
    """Conductivities (S/m) and permittivities (F/m) of background, insulators and disks."""

    sigma_b: float = 1.0
    eps_b: float = 1.0e-9
    sigma_c: float = 1.0e-6
    eps_c: float = 1.0e-7
    sigma_d: float = 10.0
    eps_d: float = 1.0e-9

    def __post_init__(self) -> None:
        for name, value in asdict(self).items():
            if not math.isfinite(value) or value < 0.0:
                raise InvalidMaterials(f"{name} must be a finite nonnegative number, got {value}")
        if self.sigma_b <= 0.0:
            raise InvalidMaterials("sigma_b must be positive")

    def check_regime(self) -> None:
        """Raise unless the insulating and conductive regime assumptions hold."""
        if self.sigma_c / self.sigma_b > 1.0e-3:
            raise InvalidMaterials(f"sigma_c/sigma_b = {self.sigma_c / self.sigma_b:.3g} exceeds 1e-3")
        if self.sigma_d <= self.sigma_b:
            raise InvalidMaterials("sigma_d must exceed sigma_b")

    def gamma_b(self, omega: Frequency | float) -> complex:
        return complex(self.sigma_b, _omega(omega) * self.eps_b)

    def gamma_c(self, omega: Frequency | float) -> complex:
        return complex(self.sigma_c, _omega(omega) * self.eps_c)

    def gamma_d(self, omega: Frequency | float) -> complex:
        return complex(self.sigma_d, _omega(omega) * self.eps_d)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> MaterialSpec:
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown material keys: {sorted(unknown)}")
        return cls(**{key: float(value) for key, value in data.items()})

    def to_dict(self) -> dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class Frequency:
    """Angular frequency inside the supported band (0, 2*pi*1 MHz]."""

    omega: float

    def __post_init__(self) -> None:
        if not self.omega > 0.0:
            raise ConfigError(f"angular frequency must be positive, got {self.omega}")
        if self.hz > MAX_FREQUENCY_HZ * (1.0 + 1e-12):
            raise ConfigError(f"{self.hz:.6g} Hz is above the 1 MHz band")

    @property
    def hz(self) -> float:
        return self.omega / (2.0 * math.pi)

    @classmethod
    def from_hz(cls, hz: float) -> Frequency:
        return cls(2.0 * math.pi * float(hz))


def _omega(omega: Frequency | float) -> float:
    return omega.omega if isinstance(omega, Frequency) else float(omega)


def lambda_c(omega: Frequency | float, m: MaterialSpec) -> complex:
    """Insulator-to-background admittivity ratio.

    Args:
        omega: Angular frequency. Plain floats bypass the band check so that limits can be evaluated.
        m: Material parameters.

    Returns:
        complex: ``(sigma_c + i w eps_c) / (sigma_b + i w eps_b)``.

    """
    return m.gamma_c(omega) / m.gamma_b(omega)


def lambda_d(omega: Frequency | float, m: MaterialSpec, convention: LambdaConvention = "printed") -> complex:
    """Shifted conductor contrast entering the disk polarization tensor.

    The "printed" convention keeps the minus sign in front of the permittivity
    difference in the denominator; "conjugate" uses ``gamma_d - gamma_b`` there.

    Args:
        omega: Angular frequency.
        m: Material parameters.
        convention: Sign convention of the denominator.

    Returns:
        complex: ``(gamma_d + gamma_b) / (2 * denominator)``.

    Raises:
        DegenerateContrast: If the denominator vanishes.

    """
    w = _omega(omega)
    numerator = complex(m.sigma_d + m.sigma_b, w * (m.eps_d + m.eps_b))
    if convention == "printed":
        denominator = 2.0 * complex(m.sigma_d - m.sigma_b, -w * (m.eps_d - m.eps_b))
    elif convention == "conjugate":
        denominator = 2.0 * complex(m.sigma_d - m.sigma_b, w * (m.eps_d - m.eps_b))
    else:
        raise ConfigError(f"unknown lambda_d convention {convention!r}")
    if denominator == 0:
        raise DegenerateContrast("lambda_d undefined: disk and background admittivities coincide")
    return numerator / denominator


def admittivity_at(x: Any, omega: Frequency | float, phantom: Phantom) -> complex:
    """Piecewise-constant admittivity of the phantom at a point.

    Args:
        x: Point as a length-2 sequence.
        omega: Angular frequency.
        phantom: Phantom whose regions are queried.

    Returns:
        complex: gamma_c on insulating strips, gamma_d inside disks, gamma_b elsewhere.

    Raises:
        OutOfDomain: If ``x`` lies outside the domain disk.

    """
    point = np.asarray(x, dtype=float)
    if np.hypot(*point) > phantom.domain_radius:
        raise OutOfDomain(f"point {point.tolist()} is outside the domain of radius {phantom.domain_radius}")
    region = phantom.region_of(point)
    if region == "insulator":
        return phantom.materials.gamma_c(omega)
    if region == "disk":
        return phantom.materials.gamma_d(omega)
    return phantom.materials.gamma_b(omega)
