"""Run configuration: JSON files parsed into frozen dataclasses.

Every section rejects unknown keys. Relative paths are resolved against the
directory of the configuration file.
"""

from __future__ import annotations

# Import built-in modules
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal, TypeVar

# Import local modules
from mfeit.core.admittivity import MAX_FREQUENCY_HZ, Frequency, MaterialSpec
from mfeit.core.geometry import Phantom, PhantomSpec, build_phantom, builtin_phantom_spec, load_phantom_spec
from mfeit.core.mesh import DEFAULT_MIN_ANGLES
from mfeit.core.poles import PoleConfig
from mfeit.errors import ConfigError, IOFailure

T = TypeVar("T")

DEFAULT_FREQUENCIES_HZ = (10.0, 1.0e3, 5.0e4, 1.5e5, 2.5e5, 5.0e5)


def _section(cls: type[T], data: Any, name: str) -> T:
    """Build a frozen dataclass from a JSON object, rejecting unknown keys."""
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"section {name!r} must be a JSON object")
    known = {f.name for f in dataclasses.fields(cls) if f.init}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    values = {key: tuple(value) if isinstance(value, list) else value for key, value in data.items()}
    try:
        return cls(**values)
    except TypeError as exc:
        raise ConfigError(f"malformed section {name!r}: {exc}") from exc


@dataclass(frozen=True)
class MeshConfig:
    h: float = 0.05
    min_angles: tuple[float, ...] = DEFAULT_MIN_ANGLES
    resolve_strips: bool = False

    def __post_init__(self) -> None:
        if not self.h > 0.0:
            raise ConfigError("mesh.h must be positive")
        if not self.min_angles:
            raise ConfigError("mesh.min_angles needs at least one angle")


@dataclass(frozen=True)
class SweepConfig:
    """Frequencies, noise and electrode layout of the simulated acquisition."""

    frequencies_hz: tuple[float, ...] = DEFAULT_FREQUENCIES_HZ
    snr_db: float | None = None
    seed: int | None = None
    n_electrodes: int = 16
    coverage: float = 0.5
    mask_adjacent: bool = True

    def __post_init__(self) -> None:
        if not self.frequencies_hz:
            raise ConfigError("sweep.frequencies_hz must list at least one frequency")
        for hz in self.frequencies_hz:
            if not 0.0 < float(hz) <= MAX_FREQUENCY_HZ:
                raise ConfigError(f"frequency {hz} Hz is outside (0, {MAX_FREQUENCY_HZ:g}]")
        if len(set(self.frequencies_hz)) != len(self.frequencies_hz):
            raise ConfigError("sweep.frequencies_hz contains duplicates")

    @property
    def frequencies(self) -> list[Frequency]:
        return [Frequency.from_hz(hz) for hz in self.frequencies_hz]


@dataclass(frozen=True)
class PixelConfig:
    n_grid: int = 32

    def __post_init__(self) -> None:
        if int(self.n_grid) < 1:
            raise ConfigError("pixels.n_grid must be positive")


@dataclass(frozen=True)
class RegularizationConfig:
    """Tikhonov parameter: fixed ``alpha``, discrepancy rule from ``noise_level``, or relative default."""

    alpha: float | None = None
    relative_alpha: float = 1e-4
    noise_level: float | None = None
    tau: float = 1.0

    def __post_init__(self) -> None:
        if self.alpha is not None and self.alpha < 0.0:
            raise ConfigError("regularization.alpha must be nonnegative")
        if not self.relative_alpha > 0.0:
            raise ConfigError("regularization.relative_alpha must be positive")

    def kwargs(self) -> dict[str, Any]:
        return {"relative_alpha": self.relative_alpha, "noise_level": self.noise_level, "tau": self.tau}


@dataclass(frozen=True)
class PcaConfig:
    n_components: int = 2
    add_mean: bool = False
    mode: Literal["average", "amplitude"] = "amplitude"

    def __post_init__(self) -> None:
        if self.n_components < 1:
            raise ConfigError("pca.n_components must be at least 1")
        if self.mode not in ("average", "amplitude"):
            raise ConfigError(f"pca.mode must be 'average' or 'amplitude', got {self.mode!r}")


@dataclass(frozen=True)
class DetectionConfig:
    """Frequency, current direction and pole-model controls of the detection stage.

    ``synthetic`` replaces simulated data by an explicit model:
    ``{"segments": [{"P", "Q", "C"}], "disks": [{"z", "D"}], "n_samples", "radius"}``.
    """

    frequency_hz: float = 5.0e5
    direction: tuple[float, float] = (1.0, 0.0)
    sign: Literal["plus", "minus"] = "plus"
    n_segments: int | None = None
    n_disks: int | None = None
    rank_tol: float = 1e-6
    max_poles: int = 12
    tolerance: float = 5e-2
    min_separation: float = 1e-2
    synthetic: dict[str, Any] | None = None

    def __post_init__(self) -> None:
        if self.sign not in ("plus", "minus"):
            raise ConfigError(f"detection.sign must be 'plus' or 'minus', got {self.sign!r}")
        if len(self.direction) != 2 or not any(self.direction):
            raise ConfigError("detection.direction must be a nonzero 2-vector")
        norm = (self.direction[0] ** 2 + self.direction[1] ** 2) ** 0.5
        object.__setattr__(self, "direction", (self.direction[0] / norm, self.direction[1] / norm))

    def pole_config(self) -> PoleConfig:
        return PoleConfig(
            n_segments=self.n_segments,
            n_disks=self.n_disks,
            max_poles=self.max_poles,
            rank_tol=self.rank_tol,
            tolerance=self.tolerance,
            min_separation=self.min_separation,
        )


@dataclass(frozen=True)
class JumpStudyConfig:
    """Convergence study of the jump conditions for one centered segment."""

    deltas: tuple[float, ...] = (1e-2, 5e-3, 2.5e-3, 1.25e-3)
    frequencies_hz: tuple[float, ...] = (10.0, 5.0e4, 5.0e5)
    segment_length: float = 1.0
    h: float = 0.05
    c0_fraction: float = 0.1
    direction: tuple[float, float] = (0.0, 1.0)
    compare_models: bool = True
    materials: dict[str, float] = field(default_factory=lambda: {"sigma_c": 0.05})

    def __post_init__(self) -> None:
        if len(self.deltas) < 3:
            raise ConfigError("jump_study.deltas needs at least three values")
        if any(b >= a for a, b in zip(self.deltas, self.deltas[1:], strict=False)):
            raise ConfigError("jump_study.deltas must be strictly decreasing")
        if not self.frequencies_hz:
            raise ConfigError("jump_study.frequencies_hz must not be empty")
        if not 0.0 < self.segment_length <= 1.6:
            raise ConfigError("jump_study.segment_length must lie in (0, 1.6] to stay clear of the unit boundary")

    @property
    def material_spec(self) -> MaterialSpec:
        return MaterialSpec.from_dict(dict(self.materials))


@dataclass(frozen=True)
class RunConfig:
    """Complete configuration of one pipeline run."""

    phantom_path: Path | None = None
    phantom: str | None = None
    sweep: SweepConfig = field(default_factory=SweepConfig)
    mesh: MeshConfig = field(default_factory=MeshConfig)
    pixels: PixelConfig = field(default_factory=PixelConfig)
    regularization: RegularizationConfig = field(default_factory=RegularizationConfig)
    pca: PcaConfig = field(default_factory=PcaConfig)
    detection: DetectionConfig = field(default_factory=DetectionConfig)
    jump_study: JumpStudyConfig = field(default_factory=JumpStudyConfig)
    output_dir: Path = Path("mfeit-out")
    seed: int = 0
    model: Literal["zero_thickness", "resolved"] = "zero_thickness"
    workers: int | None = None

    def __post_init__(self) -> None:
        if self.phantom_path is not None and self.phantom is not None:
            raise ConfigError("give either phantom_path or a built-in phantom name, not both")
        if self.model not in ("zero_thickness", "resolved"):
            raise ConfigError(f"model must be 'zero_thickness' or 'resolved', got {self.model!r}")

    def phantom_spec(self) -> PhantomSpec:
        if self.phantom_path is not None:
            if not self.phantom_path.is_file():
                raise ConfigError(f"phantom file {self.phantom_path} does not exist")
            return load_phantom_spec(self.phantom_path)
        if self.phantom is not None:
            return builtin_phantom_spec(self.phantom)
        raise ConfigError("the run needs phantom_path or phantom")

    def build_phantom(self) -> Phantom:
        return build_phantom(self.phantom_spec())

    @property
    def noise_seed(self) -> int:
        return self.sweep.seed if self.sweep.seed is not None else self.seed


SECTIONS: dict[str, type] = {
    "sweep": SweepConfig,
    "mesh": MeshConfig,
    "pixels": PixelConfig,
    "regularization": RegularizationConfig,
    "pca": PcaConfig,
    "detection": DetectionConfig,
    "jump_study": JumpStudyConfig,
}


def parse_run_config(data: dict[str, Any], base_dir: str | Path = ".") -> RunConfig:
    """Build a RunConfig from a parsed JSON document.

    Args:
        data: Top-level JSON object.
        base_dir: Directory relative paths resolve against.

    Returns:
        RunConfig: Validated configuration.

    Raises:
        ConfigError: On unknown keys or invalid values.

    """
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    top = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(data) - top
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    base = Path(base_dir)
    values: dict[str, Any] = {name: _section(cls, data.get(name), name) for name, cls in SECTIONS.items()}
    if data.get("phantom_path") is not None:
        values["phantom_path"] = (base / data["phantom_path"]).resolve()
    if data.get("phantom") is not None:
        values["phantom"] = str(data["phantom"])
    values["output_dir"] = (base / data.get("output_dir", "mfeit-out")).resolve()
    for key in ("seed", "workers"):
        if data.get(key) is not None:
            values[key] = int(data[key])
    if "model" in data:
        values["model"] = data["model"]
    return RunConfig(**values)


def load_run_config(path: str | Path, **overrides: Any) -> RunConfig:
    """Read a configuration file and apply command-line overrides.

    Args:
        path: JSON configuration file.
        **overrides: ``out``, ``seed`` and ``sign`` values; ``None`` leaves the file value.

    Returns:
        RunConfig: Validated configuration.

    """
    source = Path(path)
    try:
        data = json.loads(source.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"configuration file {source} does not exist") from exc
    except OSError as exc:
        raise IOFailure(f"cannot read configuration {source}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"configuration {source} is not valid JSON: {exc}") from exc
    config = parse_run_config(data, source.parent)
    return apply_overrides(config, **overrides)


def apply_overrides(
    config: RunConfig, out: str | Path | None = None, seed: int | None = None, sign: str | None = None
) -> RunConfig:
    if out is not None:
        config = dataclasses.replace(config, output_dir=Path(out).resolve())
    if seed is not None:
        config = dataclasses.replace(config, seed=int(seed), sweep=dataclasses.replace(config.sweep, seed=int(seed)))
    if sign is not None:
        config = dataclasses.replace(config, detection=dataclasses.replace(config.detection, sign=sign))
    return config
