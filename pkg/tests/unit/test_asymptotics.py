"""Tests for the small-inclusion asymptotics and residue-based detection."""

import numpy as np
import pytest

from mfeit.core.admittivity import Frequency, MaterialSpec, lambda_c, lambda_d
from mfeit.core.asymptotics import (
    boundary_operator,
    circle_curve,
    detect_from_derivative,
    ellipse_curve,
    expansion_coefficients,
    high_freq_prediction,
    low_freq_prediction,
    meromorphic_potential,
    polarization_disk,
    polarization_quadrature,
    segment_dipole_closed_form,
    segment_dipole_quadrature,
    trace_to_derivative,
)
from mfeit.core.geometry import ConductiveDisk, Phantom, ThinInsulator
from mfeit.core.poles import PoleConfig, contour_points, meromorphic_derivative
from mfeit.errors import ConfigError, DegenerateContrast, IllConditioned

OMEGA = Frequency.from_hz(1.0e5)


def _circle(n=128, radius=1.0):
    theta = 2.0 * np.pi * np.arange(n) / n
    return radius * np.column_stack([np.cos(theta), np.sin(theta)])


class TestBoundaryOperator:
    """Test suite for boundary_operator."""

    @pytest.mark.parametrize("sign", ["plus", "minus"])
    def test_closed_form_matches_quadrature(self, sign):
        rng = np.random.default_rng(3)
        trace = rng.normal(size=64) + 1j * rng.normal(size=64)
        closed = boundary_operator(trace, sign=sign)
        quadrature = boundary_operator(trace, sign=sign, method="quadrature")
        np.testing.assert_allclose(closed, quadrature, atol=1e-12)

    def test_constants_and_zero_mean(self):
        ones = np.ones(32)
        np.testing.assert_allclose(boundary_operator(ones, sign="minus"), 0.0, atol=1e-15)
        np.testing.assert_allclose(boundary_operator(ones, sign="plus"), 1.0)
        wave = np.cos(2.0 * np.pi * np.arange(32) / 32)
        np.testing.assert_allclose(boundary_operator(wave, sign="plus"), 0.5 * wave, atol=1e-15)

    def test_quadrature_on_larger_circle(self):
        trace = np.sin(3.0 * 2.0 * np.pi * np.arange(48) / 48) + 2.0
        closed = boundary_operator(trace, radius=2.5)
        np.testing.assert_allclose(closed, boundary_operator(trace, method="quadrature", radius=2.5), atol=1e-12)

    @pytest.mark.parametrize(("sign", "method"), [("both", "closed_form"), ("plus", "fourier")])
    def test_rejects_unknown_options(self, sign, method):
        with pytest.raises(ConfigError):
            boundary_operator(np.ones(8), sign=sign, method=method)


class TestPolarization:
    """Test suite for the polarization tensors."""

    def test_disk_is_scalar(self):
        tensor = polarization_disk(0.6 + 0.1j, np.pi * 0.01)
        assert tensor.is_scalar()
        assert tensor.m[0, 0] == pytest.approx(np.pi * 0.01 / (0.6 + 0.1j))

    def test_disk_degenerate(self):
        with pytest.raises(DegenerateContrast):
            polarization_disk(0.0, 1.0)

    @pytest.mark.parametrize("seed", range(10))
    def test_quadrature_matches_disk(self, seed):
        rng = np.random.default_rng(seed)
        ld = complex(*rng.uniform(-2.0, 2.0, size=2))
        while abs(ld) <= 0.6:
            ld *= 2.0
        tensor = polarization_quadrature(ld, circle_curve(0.1, 128, center=(0.2, -0.1)))
        np.testing.assert_allclose(tensor.m, polarization_disk(ld, np.pi * 0.01).m, rtol=1e-6, atol=1e-14)

    def test_unit_disk(self):
        tensor = polarization_quadrature(2.0, circle_curve(1.0, 256))
        np.testing.assert_allclose(tensor.m, 0.5 * np.pi * np.eye(2), atol=1e-6)

    def test_ellipse_is_symmetric_not_scalar(self):
        tensor = polarization_quadrature(0.8, ellipse_curve(0.2, 0.1, 256))
        assert tensor.is_symmetric(1e-8)
        assert not tensor.is_scalar(1e-3)
        assert abs(tensor.m[0, 0]) > abs(tensor.m[1, 1])

    def test_spectrum_is_rejected(self):
        # 1/2 is the eigenvalue of the constant mode on a circle
        with pytest.raises(IllConditioned):
            polarization_quadrature(0.5, circle_curve(1.0, 64))


class TestExpansionCoefficients:
    """Test suite for expansion_coefficients and the high-frequency prediction."""

    def test_tangential_current(self, segment_phantom, materials):
        coeffs = expansion_coefficients(segment_phantom, OMEGA, (1.0, 0.0))
        lc = lambda_c(OMEGA, materials)
        scale = 0.01 / np.pi
        np.testing.assert_allclose(coeffs.a_tau, [1.0])
        np.testing.assert_allclose(coeffs.a_nu, [0.0], atol=1e-15)
        assert coeffs.C_re[0] == pytest.approx(scale * (lc.real - 1.0))
        assert coeffs.C_im[0] == pytest.approx(scale * lc.imag)
        assert coeffs.lambda_c == pytest.approx(lc)

    def test_normal_current(self, segment_phantom, materials):
        coeffs = expansion_coefficients(segment_phantom, OMEGA, (0.0, 1.0))
        normal = 1.0 - 1.0 / lambda_c(OMEGA, materials)
        assert coeffs.C_re[0] == pytest.approx(1j * 0.01 / np.pi * normal.real)
        assert coeffs.C_im[0] == pytest.approx(1j * 0.01 / np.pi * normal.imag)

    def test_disk_coefficients(self, mixed_phantom, materials):
        coeffs = expansion_coefficients(mixed_phantom, OMEGA, (0.6, 0.8))
        strength = 0.01 / (2.0 * lambda_d(OMEGA, materials))
        assert coeffs.centers[0] == pytest.approx(-0.3j)
        assert coeffs.D_re[0] == pytest.approx(-strength.real * (0.6 + 0.8j))
        assert coeffs.D_im[0] == pytest.approx(-strength.imag * (0.6 + 0.8j))

    def test_model_is_derivative_of_potential(self, mixed_phantom):
        coeffs = expansion_coefficients(mixed_phantom, OMEGA, (0.6, 0.8))
        x = np.array([0.9 + 0.1j, -0.5 - 0.7j, 0.2 + 0.85j])
        step = 1e-6
        numeric = (meromorphic_potential(coeffs, x + step) - meromorphic_potential(coeffs, x - step)) / (2 * step)
        np.testing.assert_allclose(meromorphic_derivative(coeffs.model("re"), x), numeric, rtol=1e-6)

    def test_prediction_is_real_part_of_potential(self, mixed_phantom):
        # the current is tangential to the segment, so no branch of arg enters
        coeffs = expansion_coefficients(mixed_phantom, OMEGA, (1.0, 0.0))
        points = _circle()
        phi = high_freq_prediction(mixed_phantom, OMEGA, (1.0, 0.0), points)
        np.testing.assert_allclose(phi.real, meromorphic_potential(coeffs, points, "re").real, atol=1e-12)
        np.testing.assert_allclose(phi.imag, meromorphic_potential(coeffs, points, "im").real, atol=1e-12)

    def test_homogeneity_in_size(self, materials):
        def coefficients(delta, radius):
            phantom = Phantom(
                domain_radius=1.0,
                insulators=(ThinInsulator((-0.4, 0.3), (0.4, 0.3), delta),),
                disks=(ConductiveDisk((0.0, -0.3), radius),),
                materials=materials,
            )
            return expansion_coefficients(phantom, OMEGA, (0.6, 0.8))

        small, large = coefficients(0.005, 0.05), coefficients(0.01, 0.1)
        np.testing.assert_allclose(large.C_re, 2.0 * small.C_re, rtol=1e-12)
        np.testing.assert_allclose(large.C_im, 2.0 * small.C_im, rtol=1e-12)
        np.testing.assert_allclose(large.D_re, 4.0 * small.D_re, rtol=1e-12)
        np.testing.assert_allclose(large.D_im, 4.0 * small.D_im, rtol=1e-12)

    def test_to_dict(self, mixed_phantom):
        data = expansion_coefficients(mixed_phantom, OMEGA, (1.0, 0.0)).to_dict()
        assert data["segments"][0]["P"] == [-0.4, 0.3]
        assert data["disks"][0]["z"] == [0.0, -0.3]
        assert data["a"] == [1.0, 0.0]

    def test_direction_must_be_unit(self, segment_phantom):
        with pytest.raises(ConfigError):
            expansion_coefficients(segment_phantom, OMEGA, (1.0, 1.0))

    def test_vanishing_insulator_admittivity(self, segment_phantom):
        phantom = segment_phantom.with_materials(MaterialSpec(sigma_c=0.0, eps_c=0.0))
        with pytest.raises(DegenerateContrast):
            expansion_coefficients(phantom, OMEGA, (1.0, 0.0))
        with pytest.raises(DegenerateContrast):
            high_freq_prediction(phantom, OMEGA, (1.0, 0.0), _circle())


class TestSegmentDipole:
    """Test suite for the double-layer potential of a segment."""

    def test_quadrature_matches_closed_form(self, segment_phantom):
        segment = segment_phantom.insulators[0]
        s = np.linspace(0.0, segment.length, 4001)
        points = _circle(16, 0.9)
        quadrature = segment_dipole_quadrature(segment, s, np.ones_like(s), points)
        np.testing.assert_allclose(quadrature, segment_dipole_closed_form(segment, points), atol=1e-6)

    def test_low_frequency_prediction_sign(self, segment_phantom):
        segment = segment_phantom.insulators[0]
        s = np.linspace(0.0, segment.length, 801)
        jump = (1.0 + 0.5j) * np.ones_like(s)
        points = _circle(16)
        plus = low_freq_prediction(segment_phantom, OMEGA, {0: (s, jump)}, points)
        minus = low_freq_prediction(segment_phantom, OMEGA, {0: (s, jump)}, points, sign="minus")
        np.testing.assert_allclose(plus, -minus)
        expected = (1.0 + 0.5j) * segment_dipole_closed_form(segment, points)
        np.testing.assert_allclose(plus, expected, atol=1e-5)

    def test_unknown_segment(self, segment_phantom):
        with pytest.raises(ConfigError):
            low_freq_prediction(segment_phantom, OMEGA, {3: (np.zeros(2), np.zeros(2))}, _circle())


class TestDetection:
    """Test suite for trace_to_derivative and detect_from_derivative."""

    def test_trace_to_derivative(self, mixed_phantom):
        coeffs = expansion_coefficients(mixed_phantom, OMEGA, (0.6, 0.8))
        x = contour_points(256, 1.0)
        data = meromorphic_potential(coeffs, x).real
        expected = meromorphic_derivative(coeffs.model("re"), x)
        np.testing.assert_allclose(trace_to_derivative(data + 3.0), expected, atol=1e-10)

    def test_trace_to_derivative_scales_with_radius(self):
        radius = 2.0
        x = contour_points(128, radius)
        g = 0.3 / (x - 0.4j)
        expected = -0.3 / (x - 0.4j) ** 2
        np.testing.assert_allclose(trace_to_derivative(g.real, radius), expected, atol=1e-12)

    def test_detects_segment_and_disk(self, mixed_phantom):
        coeffs = expansion_coefficients(mixed_phantom, OMEGA, (1.0, 0.0))
        x = contour_points(256, 1.0)
        report = detect_from_derivative(
            meromorphic_derivative(coeffs.model("re"), x),
            meromorphic_derivative(coeffs.model("im"), x),
            config=PoleConfig(n_segments=1, n_disks=1),
            frequency_hz=OMEGA.hz,
        )
        assert report.fit_residual < 1e-6
        assert len(report.segments) == 1 and len(report.disks) == 1
        (p, q), segment = coeffs.endpoints[0], report.segments[0]
        assert {round(segment.p.real, 6), round(segment.q.real, 6)} == {-0.4, 0.4}
        np.testing.assert_allclose([segment.p.imag, segment.q.imag], [0.3, 0.3], atol=1e-6)
        # C (Q - P) does not depend on which end is called P
        assert segment.c_re * (segment.q - segment.p) == pytest.approx(coeffs.C_re[0] * (q - p), rel=1e-6)
        assert segment.c_im * (segment.q - segment.p) == pytest.approx(coeffs.C_im[0] * (q - p), rel=1e-5)
        disk = report.disks[0]
        assert disk.z == pytest.approx(-0.3j, abs=1e-6)
        assert disk.d_re == pytest.approx(coeffs.D_re[0], rel=1e-6)
        assert disk.d_im == pytest.approx(coeffs.D_im[0], abs=1e-9)

        data = report.to_dict()
        assert data["frequency_hz"] == pytest.approx(1.0e5)
        assert data["disks"][0]["z"] == pytest.approx([0.0, -0.3], abs=1e-6)
        assert data["unpaired"] == []
