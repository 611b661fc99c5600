"""Pipeline stages shared by the command line and the MCP tools.

Stages exchange data only through files under ``output_dir``; each writes a
manifest with SHA-256 hashes that the next stage verifies.
"""

from __future__ import annotations

# Import built-in modules
import dataclasses
import math
from pathlib import Path
from typing import Any

# Import third-party modules
import numpy as np
import pandas as pd
from loguru import logger

# Import local modules
from mfeit.config import RunConfig
from mfeit.core.admittivity import Frequency
from mfeit.core.asymptotics import detect, detect_from_derivative
from mfeit.core.forward import NeumannCurrent, jump_profile, solve_resolved, solve_zero_thickness
from mfeit.core.fusion import fuse, write_fused
from mfeit.core.geometry import Phantom, PhantomSpec, ThinInsulator, build_phantom, phantom_to_spec
from mfeit.core.io import load_manifest, read_json, write_json, write_manifest, write_table
from mfeit.core.mesh import mesh_domain
from mfeit.core.pixels import Pixelation
from mfeit.core.poles import MeromorphicModel, contour_points, meromorphic_derivative
from mfeit.core.protocol import (
    BoundaryDataset,
    ElectrodeLayout,
    add_noise,
    mask_adjacent,
    read_dataset,
    reference_sweep,
    simulate_sweep,
    write_dataset,
)
from mfeit.core.reconstruct import (
    build_sensitivity,
    read_image_stack,
    reconstruct_sweep,
    render_stack,
    write_image_stack,
)
from mfeit.errors import ConfigError, IOFailure

SIMULATE, RECONSTRUCT, FUSE, DETECT, VALIDATE_JUMP = "simulate", "reconstruct", "fuse", "detect", "validate_jump"


def stage_dir(config: RunConfig, stage: str) -> Path:
    return config.output_dir / stage


def _manifest(config: RunConfig, stage: str) -> dict[str, Any]:
    path = stage_dir(config, stage) / "manifest.json"
    if not path.is_file():
        raise IOFailure(f"{path} does not exist; run the {stage} stage first")
    return load_manifest(path)


def _layout(config: RunConfig, radius: float) -> ElectrodeLayout:
    return ElectrodeLayout(config.sweep.n_electrodes, config.sweep.coverage, radius=radius)


def _pixelation(config: RunConfig, radius: float) -> Pixelation:
    return Pixelation(config.pixels.n_grid, radius)


# -- simulate ---------------------------------------------------------------------


def run_simulate(config: RunConfig) -> list[Path]:
    """Simulate the phantom and homogeneous references at every sweep frequency.

    Returns:
        list[Path]: Written files, manifest last.

    """
    phantom = config.build_phantom()
    out = stage_dir(config, SIMULATE)
    mesh = mesh_domain(
        phantom,
        config.mesh.h,
        resolve_strips=config.model == "resolved" or config.mesh.resolve_strips,
        min_angles=config.mesh.min_angles,
        pixelation=_pixelation(config, phantom.domain_radius),
    )
    layout = _layout(config, phantom.domain_radius)
    frequencies = config.sweep.frequencies
    data = simulate_sweep(phantom, mesh, layout, frequencies, config.model, workers=config.workers)
    references = reference_sweep(mesh, phantom.materials, layout, frequencies, workers=config.workers)
    if config.sweep.snr_db is not None:
        data = [add_noise(d, config.sweep.snr_db, config.noise_seed + i) for i, d in enumerate(data)]
    if config.sweep.mask_adjacent:
        data = [mask_adjacent(d) for d in data]
        references = [mask_adjacent(r) for r in references]

    entries: list[tuple[Path, dict[str, Any]]] = []
    phantom_file = write_json(phantom_to_spec(phantom).to_dict(), out / "phantom.json")
    entries.append((phantom_file, {"kind": "phantom"}))
    for i, (dataset, reference) in enumerate(zip(data, references, strict=True)):
        fields = {"index": i, "omega": dataset.omega, "frequency_hz": dataset.hz}
        for kind, item in (("data", dataset), ("reference", reference)):
            voltages, traces = write_dataset(item, out / f"{kind}_{i:02d}.csv")
            entries.append((voltages, {**fields, "kind": kind}))
            entries.append((traces, {**fields, "kind": f"{kind}_traces"}))
    meta = {
        "model": config.model,
        "h": config.mesh.h,
        "n_nodes": mesh.n_nodes,
        "n_triangles": mesh.n_triangles,
        "n_electrodes": layout.n_electrodes,
        "coverage": layout.coverage,
        "domain_radius": phantom.domain_radius,
        "snr_db": config.sweep.snr_db,
        "seed": config.noise_seed,
        "reciprocity_error": max(d.reciprocity_error() for d in references),
    }
    manifest = write_manifest(out / "manifest.json", entries, meta)
    logger.info(f"Simulation wrote {len(entries)} files to {out}")
    return [path for path, _ in entries] + [manifest]


def load_simulation(config: RunConfig) -> tuple[PhantomSpec, list[BoundaryDataset], list[BoundaryDataset], dict]:
    """Phantom spec, datasets and references recorded by the simulate stage, by frequency index."""
    manifest = _manifest(config, SIMULATE)
    files = manifest["files"]
    phantom = next((f for f in files if f["kind"] == "phantom"), None)
    if phantom is None:
        raise IOFailure("simulation manifest lists no phantom")
    spec = PhantomSpec.from_dict(read_json(phantom["abspath"]))

    def collect(kind: str) -> list[BoundaryDataset]:
        chosen = sorted((f for f in files if f["kind"] == kind), key=lambda f: f["index"])
        return [read_dataset(f["abspath"], {"kind": kind, "index": f["index"]}) for f in chosen]

    return spec, collect("data"), collect("reference"), manifest["meta"]


# -- reconstruct ------------------------------------------------------------------


def run_reconstruct(config: RunConfig) -> list[Path]:
    """Image every simulated frequency with the linearized sensitivity method."""
    spec, data, references, meta = load_simulation(config)
    phantom = build_phantom(dataclasses.replace(spec, check_regime=False))
    radius = phantom.domain_radius
    background = Phantom(domain_radius=radius, materials=phantom.materials)
    pixelation = _pixelation(config, radius)
    mesh = mesh_domain(background, config.mesh.h, min_angles=config.mesh.min_angles, pixelation=pixelation)
    layout = ElectrodeLayout(int(meta["n_electrodes"]), float(meta["coverage"]), radius=radius)
    sensitivity = build_sensitivity(mesh, layout, phantom.materials, pixelation)
    reg = config.regularization
    stack = reconstruct_sweep(data, references, sensitivity, reg.alpha, workers=config.workers, **reg.kwargs())

    out = stage_dir(config, RECONSTRUCT)
    images = write_image_stack(stack, out / "images.csv")
    renders = render_stack(stack, out, "image")
    info = write_json(
        {
            "n_grid": pixelation.n_grid,
            "domain_radius": radius,
            "frequencies_hz": stack.frequencies_hz.tolist(),
            "alpha": reg.alpha,
            "relative_alpha": reg.relative_alpha,
            "noise_level": reg.noise_level,
            "normalization": "per-frequency max-abs, real and imaginary parts separately",
        },
        out / "reconstruct.json",
    )
    entries = [(images, {"kind": "images"}), (info, {"kind": "info"})]
    entries += [(path, {"kind": "render"}) for path in renders]
    manifest = write_manifest(out / "manifest.json", entries, {"n_frequencies": stack.n_frequencies})
    logger.info(f"Reconstruction wrote {len(entries)} files to {out}")
    return [path for path, _ in entries] + [manifest]


# -- fuse -------------------------------------------------------------------------


def run_fuse(config: RunConfig) -> list[Path]:
    """Fuse the reconstructed stack into integrated real and imaginary images."""
    manifest = _manifest(config, RECONSTRUCT)
    images = next((f for f in manifest["files"] if f["kind"] == "images"), None)
    if images is None:
        raise IOFailure("reconstruction manifest lists no image stack")
    info = read_json(next(f for f in manifest["files"] if f["kind"] == "info")["abspath"])
    stack = read_image_stack(images["abspath"], Pixelation(int(info["n_grid"]), float(info["domain_radius"])))
    fused = fuse(stack, config.pca.n_components, config.pca.mode, config.pca.add_mean)
    out = stage_dir(config, FUSE)
    paths = write_fused(fused, stack, out)
    manifest_path = write_manifest(out / "manifest.json", [(p, {"kind": "fused"}) for p in paths], fused.metadata())
    return paths + [manifest_path]


# -- detect -----------------------------------------------------------------------


def _xy(value: Any) -> complex:
    pair = np.asarray(value, dtype=float).reshape(-1)
    if pair.size != 2:
        raise ConfigError(f"expected a pair of numbers, got {value!r}")
    return complex(pair[0], pair[1])


def synthetic_model(spec: dict[str, Any]) -> MeromorphicModel:
    """Meromorphic model from ``{"segments": [{"P", "Q", "C"}], "disks": [{"z", "D"}]}``."""
    try:
        segments = [(_xy(s["P"]), _xy(s["Q"]), _xy(s["C"])) for s in spec.get("segments", [])]
        disks = [(_xy(d["z"]), _xy(d["D"])) for d in spec.get("disks", [])]
    except KeyError as exc:
        raise ConfigError(f"synthetic detection model entry is missing {exc}") from exc
    return MeromorphicModel.from_segments(segments, disks)


def _nearest(datasets: list[BoundaryDataset], hz: float) -> int:
    index = int(np.argmin([abs(d.hz - hz) for d in datasets]))
    if not math.isclose(datasets[index].hz, hz, rel_tol=1e-6):
        raise ConfigError(f"no simulated dataset at {hz:g} Hz; nearest is {datasets[index].hz:g} Hz")
    return index


def run_detect(config: RunConfig) -> list[Path]:
    """Recover segment endpoints and disk centers at the detection frequency."""
    settings = config.detection
    pole_config = settings.pole_config()
    if settings.synthetic is not None:
        synthetic = settings.synthetic
        radius = float(synthetic.get("radius", 1.0))
        x = contour_points(int(synthetic.get("n_samples", 256)), radius)
        real = synthetic_model(synthetic)
        imag = synthetic_model(synthetic.get("imaginary", {}))
        report = detect_from_derivative(
            meromorphic_derivative(real, x), meromorphic_derivative(imag, x), radius, pole_config
        )
    else:
        spec, data, references, meta = load_simulation(config)
        phantom = build_phantom(dataclasses.replace(spec, check_regime=False))
        i = _nearest(data, settings.frequency_hz)
        layout = ElectrodeLayout(int(meta["n_electrodes"]), float(meta["coverage"]), radius=phantom.domain_radius)
        gamma_b = phantom.materials.gamma_b(data[i].omega)
        report = detect(data[i], references[i], layout, gamma_b, settings.direction, settings.sign, pole_config)
    out = stage_dir(config, DETECT)
    result = write_json(report.to_dict() | {"sign": settings.sign}, out / "report.json")
    manifest = write_manifest(out / "manifest.json", [(result, {"kind": "report"})], {"sign": settings.sign})
    logger.info(
        f"Detected {len(report.segments)} segments and {len(report.disks)} disks, residual {report.fit_residual:.3g}"
    )
    return [result, manifest]


# -- validate jump ----------------------------------------------------------------


def fitted_order(deltas: np.ndarray, errors: np.ndarray, floor: float) -> float | None:
    """Least-squares slope of log(error) against log(delta); ``None`` when errors sit at the floor."""
    if np.max(errors) <= floor or np.any(errors <= 0.0):
        return None
    slope, _ = np.polyfit(np.log(deltas), np.log(errors), 1)
    return float(slope)


def run_validate_jump(config: RunConfig) -> list[Path]:
    """Convergence of the jump relations as the strip thickness shrinks.

    For every thickness the strip is meshed as a region, the jump of the
    potential across it is compared with ``(2 delta / lambda_c) du/dnu`` and
    the jump of the normal derivative is recorded. Optionally the boundary
    traces of the resolved and zero-thickness models are compared.
    """
    study = config.jump_study
    materials = study.material_spec
    half = 0.5 * study.segment_length
    rows = []
    for delta in study.deltas:
        phantom = Phantom(
            domain_radius=1.0,
            insulators=(ThinInsulator((-half, 0.0), (half, 0.0), delta),),
            materials=materials,
            separation=0.1,
        )
        resolved_mesh = mesh_domain(phantom, study.h, resolve_strips=True)
        thin_mesh = mesh_domain(phantom, study.h) if study.compare_models else None
        for hz in study.frequencies_hz:
            omega = Frequency.from_hz(hz)
            g = NeumannCurrent.uniform_field(resolved_mesh, study.direction, materials.gamma_b(omega))
            field = solve_resolved(resolved_mesh, phantom, omega, g)
            profile = jump_profile(field, 0, study.c0_fraction)
            row = {
                "delta": delta,
                "frequency_hz": hz,
                "abs_lambda_c": abs(profile.lambda_c),
                "max_jump_error": profile.max_prediction_error,
                "max_jump": float(np.max(np.abs(profile.jump_u))) if profile.s.size else 0.0,
                "max_jump_dnu": profile.max_jump_dnu,
            }
            if thin_mesh is not None:
                g0 = NeumannCurrent.uniform_field(thin_mesh, study.direction, materials.gamma_b(omega))
                thin = solve_zero_thickness(thin_mesh, phantom, omega, g0)
                diff = np.linalg.norm(field.boundary_trace - thin.boundary_trace)
                row["model_gap"] = float(diff / np.linalg.norm(field.boundary_trace))
            rows.append(row)
            logger.info(f"delta={delta:g} at {hz:g} Hz: jump error {row['max_jump_error']:.3g}")

    table = pd.DataFrame(rows)
    orders = []
    for hz, group in table.groupby("frequency_hz", sort=False):
        deltas = group["delta"].to_numpy()
        floor = 1e-9 * max(float(group["max_jump"].max()), np.finfo(float).tiny)
        entry = {
            "frequency_hz": float(hz),
            "order_jump": fitted_order(deltas, group["max_jump_error"].to_numpy(), floor),
            "order_dnu": fitted_order(deltas, group["max_jump_dnu"].to_numpy(), floor),
        }
        if "model_gap" in group:
            entry["order_model_gap"] = fitted_order(deltas, group["model_gap"].to_numpy(), 1e-12)
        orders.append(entry)

    out = stage_dir(config, VALIDATE_JUMP)
    table_path = write_table(table, out / "jump_table.csv")
    report = write_json({"orders": orders, "rows": rows}, out / "report.json")
    lines = [f"{'frequency_hz':>14} {'order [u]':>10} {'order [du/dnu]':>15}"]
    for entry in orders:
        fmt = lambda v: "n/a" if v is None else f"{v:.3f}"  # noqa: E731
        lines.append(f"{entry['frequency_hz']:>14.6g} {fmt(entry['order_jump']):>10} {fmt(entry['order_dnu']):>15}")
    summary = out / "summary.txt"
    try:
        summary.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IOFailure(f"cannot write {summary}: {exc}") from exc
    manifest = write_manifest(
        out / "manifest.json",
        [(table_path, {"kind": "table"}), (report, {"kind": "report"}), (summary, {"kind": "summary"})],
        {"deltas": list(study.deltas)},
    )
    return [table_path, report, summary, manifest]


STAGES = {
    SIMULATE: run_simulate,
    RECONSTRUCT: run_reconstruct,
    FUSE: run_fuse,
    DETECT: run_detect,
    VALIDATE_JUMP: run_validate_jump,
}
