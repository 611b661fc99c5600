"""Tests for the linearized per-frequency reconstruction."""

import math

import numpy as np
import pytest

from mfeit.core.admittivity import Frequency
from mfeit.core.pixels import Pixelation
from mfeit.core.protocol import BoundaryDataset, ElectrodeLayout
from mfeit.core.reconstruct import (
    ImageStack,
    build_sensitivity,
    pixel_incidence,
    read_image_stack,
    reconstruct_frequency,
    reconstruct_sweep,
    render_stack,
    roi_contrast,
    select_alpha_discrepancy,
    write_image_stack,
)
from mfeit.errors import ConfigError, DimensionMismatch, SingularSystem

OMEGA = Frequency.from_hz(1.0e3).omega
THETA = 2.0 * np.pi * np.arange(16) / 16


@pytest.fixture
def small_layout():
    return ElectrodeLayout(8, 0.5)


@pytest.fixture
def quadrants():
    return Pixelation(2, 1.0)


@pytest.fixture
def sensitivity(coarse_mesh, small_layout, materials, quadrants):
    return build_sensitivity(coarse_mesh, small_layout, materials, quadrants)


def _dataset(values, omega=OMEGA, mask=None):
    n = values.shape[0]
    return BoundaryDataset(omega, values, np.zeros((n, THETA.size), dtype=complex), THETA, mask)


def _synthetic(sensitivity, image, omega=OMEGA, mask=None):
    """Data generated by the linear model itself, with a zero reference."""
    n = sensitivity.n_electrodes
    voltages = np.zeros((n, n), dtype=complex)
    rows = sensitivity.rows
    voltages[rows[:, 0], rows[:, 1]] = sensitivity.at(omega) @ image
    return _dataset(voltages, omega, mask), _dataset(np.zeros((n, n), dtype=complex), omega)


class TestSensitivity:
    """Test suite for build_sensitivity."""

    def test_shape_and_rows(self, sensitivity, quadrants):
        assert sensitivity.shape == (64, quadrants.size)
        assert sensitivity.rows[0].tolist() == [0, 0]
        assert sensitivity.rows[9].tolist() == [1, 1]

    def test_reciprocity(self, sensitivity):
        n = sensitivity.n_electrodes
        full = sensitivity.J.reshape(n, n, -1)
        np.testing.assert_allclose(full, full.transpose(1, 0, 2), atol=1e-10 * np.abs(full).max())

    def test_frequency_scaling(self, sensitivity, materials):
        omega = Frequency.from_hz(5.0e5)
        np.testing.assert_allclose(sensitivity.at(omega), sensitivity.J / materials.gamma_b(omega) ** 2)

    def test_mask_drops_rows(self, coarse_mesh, small_layout, materials, quadrants):
        mask = np.eye(8, dtype=bool)
        matrix = build_sensitivity(coarse_mesh, small_layout, materials, quadrants, mask)
        assert matrix.shape[0] == 56
        assert not np.any(matrix.rows[:, 0] == matrix.rows[:, 1])

    def test_select(self, sensitivity):
        exclude = np.zeros((8, 8), dtype=bool)
        exclude[0, :] = True
        assert sensitivity.select(exclude).size == 56
        with pytest.raises(DimensionMismatch):
            sensitivity.select(np.zeros((4, 4), dtype=bool))

    def test_pixel_incidence_covers_mesh(self, coarse_mesh, quadrants):
        incidence = pixel_incidence(coarse_mesh, quadrants)
        assert incidence.shape == (4, coarse_mesh.n_triangles)
        assert incidence.sum() == pytest.approx(coarse_mesh.areas.sum())

    def test_radius_mismatch(self, coarse_mesh, small_layout, materials):
        with pytest.raises(DimensionMismatch):
            build_sensitivity(coarse_mesh, small_layout, materials, Pixelation(2, 2.0))


class TestReconstructFrequency:
    """Test suite for reconstruct_frequency."""

    def test_inverse_crime_without_regularization(self, sensitivity):
        image = np.array([0.1 + 0.02j, 0.0, -0.05j, 0.03])
        data, ref = _synthetic(sensitivity, image)
        recovered = reconstruct_frequency(data, ref, sensitivity, alpha=0.0)
        np.testing.assert_allclose(recovered, image, rtol=1e-6, atol=1e-9)

    def test_regularization_shrinks_the_image(self, sensitivity):
        image = np.array([0.1, 0.05, -0.05, 0.02], dtype=complex)
        data, ref = _synthetic(sensitivity, image)
        weak = reconstruct_frequency(data, ref, sensitivity, relative_alpha=1e-6)
        strong = reconstruct_frequency(data, ref, sensitivity, relative_alpha=1.0)
        assert np.linalg.norm(strong) < np.linalg.norm(weak)

    def test_masked_entries_are_ignored(self, sensitivity):
        image = np.array([0.1, 0.0, 0.0, 0.0], dtype=complex)
        mask = np.zeros((8, 8), dtype=bool)
        mask[2, 3] = mask[3, 2] = True
        data, ref = _synthetic(sensitivity, image, mask=mask)
        data.V[2, 3] = data.V[3, 2] = 1.0e3
        recovered = reconstruct_frequency(data, ref, sensitivity, alpha=0.0)
        np.testing.assert_allclose(recovered, image, rtol=1e-6, atol=1e-9)

    def test_underdetermined_without_regularization(self, sensitivity):
        mask = np.ones((8, 8), dtype=bool)
        mask[0, 1] = False
        data, ref = _synthetic(sensitivity, np.ones(4, dtype=complex), mask=mask)
        with pytest.raises(SingularSystem):
            reconstruct_frequency(data, ref, sensitivity, alpha=0.0)

    def test_negative_alpha(self, sensitivity):
        data, ref = _synthetic(sensitivity, np.zeros(4, dtype=complex))
        with pytest.raises(ConfigError):
            reconstruct_frequency(data, ref, sensitivity, alpha=-1.0)

    def test_discrepancy_rule(self, sensitivity):
        image = np.array([0.1, 0.05, -0.05, 0.02], dtype=complex)
        data, ref = _synthetic(sensitivity, image)
        scale = float(np.abs(data.V).max())
        recovered = reconstruct_frequency(data, ref, sensitivity, noise_level=1e-3 * scale)
        assert np.all(np.isfinite(recovered))
        assert np.linalg.norm(recovered) <= np.linalg.norm(image) * 1.01


class TestAlphaSelection:
    """Test suite for select_alpha_discrepancy."""

    @pytest.fixture
    def problem(self):
        matrix = np.diag([1.0, 0.5, 0.1, 0.01])
        return matrix, np.array([1.0, 1.0, 1.0, 1.0])

    def test_matches_target(self, problem):
        matrix, data = problem
        alpha = select_alpha_discrepancy(matrix, data, noise_norm=0.5)
        x = np.linalg.solve(matrix.T @ matrix + alpha * np.eye(4), matrix.T @ data)
        assert np.linalg.norm(matrix @ x - data) == pytest.approx(0.5, rel=1e-4)

    def test_unreachable_targets(self, problem):
        matrix, data = problem
        assert select_alpha_discrepancy(matrix, data, noise_norm=0.0) == pytest.approx(1e-14)
        assert select_alpha_discrepancy(matrix, data, noise_norm=10.0) == pytest.approx(1e4)


class TestImageStack:
    """Test suite for image stacks and their files."""

    @pytest.fixture
    def stack(self):
        pixels = Pixelation(4, 1.0)
        images = np.column_stack([np.arange(16) * (1 + 1j), -np.arange(16) * 2.0])
        return ImageStack(images, [2.0 * math.pi * 1e3, 2.0 * math.pi * 1e4], pixels)

    def test_normalized(self, stack):
        assert np.max(np.abs(stack.normalized(0, "re"))) == pytest.approx(1.0)
        assert np.max(np.abs(stack.normalized(1, "re"))) == pytest.approx(1.0)
        np.testing.assert_array_equal(stack.normalized(1, "im"), 0.0)

    def test_dimension_checks(self):
        with pytest.raises(DimensionMismatch):
            ImageStack(np.zeros((16, 2)), [1.0], Pixelation(4, 1.0))
        with pytest.raises(DimensionMismatch):
            ImageStack(np.zeros((9, 1)), [1.0], Pixelation(4, 1.0))

    def test_file_round_trip(self, stack, tmp_path):
        path = write_image_stack(stack, tmp_path / "images.csv")
        loaded = read_image_stack(path, stack.pixelation)
        np.testing.assert_allclose(loaded.images, stack.images)
        np.testing.assert_allclose(loaded.frequencies_hz, [1e3, 1e4])
        with pytest.raises(DimensionMismatch):
            read_image_stack(path, Pixelation(8, 1.0))

    def test_render(self, stack, tmp_path):
        paths = render_stack(stack, tmp_path)
        assert [p.name for p in paths] == [
            "image_1000Hz_re.pgm",
            "image_1000Hz_im.pgm",
            "image_10000Hz_re.pgm",
            "image_10000Hz_im.pgm",
        ]
        assert all(p.read_bytes().startswith(b"P5") for p in paths)

    def test_sweep_keeps_order(self, sensitivity):
        image = np.array([0.1, 0.0, 0.0, 0.0], dtype=complex)
        omegas = [OMEGA, Frequency.from_hz(1e5).omega]
        pairs = [_synthetic(sensitivity, image * (j + 1), omega) for j, omega in enumerate(omegas)]
        stack = reconstruct_sweep([p[0] for p in pairs], [p[1] for p in pairs], sensitivity, alpha=0.0, workers=2)
        np.testing.assert_allclose(stack.omegas, omegas)
        np.testing.assert_allclose(stack.column(1), 2.0 * image, rtol=1e-6, atol=1e-9)
        with pytest.raises(DimensionMismatch):
            reconstruct_sweep([pairs[0][0]], [], sensitivity)


class TestRoiContrast:
    """Test suite for roi_contrast."""

    def test_ratio(self):
        image = np.array([2.0, 2.0, 1.0, -1.0])
        roi = np.array([True, True, False, False])
        assert roi_contrast(image, roi, ~roi) == pytest.approx(2.0)

    def test_empty_roi(self):
        with pytest.raises(ConfigError):
            roi_contrast(np.ones(3), np.zeros(3, dtype=bool), np.ones(3, dtype=bool))
