"""Tests for electrodes, multistatic sweeps and dataset files."""

import numpy as np
import pytest

from mfeit.core.admittivity import Frequency
from mfeit.core.mesh import mesh_domain
from mfeit.core.pixels import Pixelation
from mfeit.core.protocol import (
    BoundaryDataset,
    ElectrodeLayout,
    add_noise,
    adjacent_mask,
    combine_traces,
    make_injection,
    mask_adjacent,
    read_dataset,
    reference_sweep,
    simulate_sweep,
    uniform_pattern,
    write_dataset,
)
from mfeit.errors import BadIndex, ConfigError, DimensionMismatch, IOFailure


@pytest.fixture
def small_layout():
    return ElectrodeLayout(8, 0.5)


@pytest.fixture
def sweep(mixed_phantom, small_layout):
    mesh = mesh_domain(mixed_phantom, 0.2, pixelation=Pixelation(8, 1.0))
    freqs = [Frequency.from_hz(1e3), Frequency.from_hz(5e5)]
    data = simulate_sweep(mixed_phantom, mesh, small_layout, freqs, workers=2)
    refs = reference_sweep(mesh, mixed_phantom.materials, small_layout, freqs, workers=2)
    return data, refs


class TestElectrodeLayout:
    """Test suite for the electrode layout."""

    def test_validation(self):
        with pytest.raises(ConfigError):
            ElectrodeLayout(2, 0.5)
        with pytest.raises(ConfigError):
            ElectrodeLayout(16, 1.0)

    def test_cyclic_next_index(self, layout):
        assert layout.next_index(16) == 1
        with pytest.raises(BadIndex):
            layout.next_index(0)

    def test_electrodes_do_not_overlap(self, coarse_mesh, layout):
        masks = np.array([layout.electrode_mask(coarse_mesh, k) for k in range(1, 17)])
        assert masks.any(axis=1).all()
        assert masks.sum(axis=0).max() == 1


class TestInjections:
    """Test suite for injection currents."""

    def test_unit_current_between_neighbours(self, coarse_mesh, layout):
        current = make_injection(coarse_mesh, layout, 3)
        load = current.load
        assert load[layout.electrode_mask(coarse_mesh, 3)].sum() == pytest.approx(1.0)
        assert load[layout.electrode_mask(coarse_mesh, 4)].sum() == pytest.approx(-1.0)
        assert load.sum() == pytest.approx(0.0, abs=1e-14)

    def test_uniform_pattern_is_centered(self, layout):
        weights = uniform_pattern(layout, (1.0, 0.0), scale=2.0)
        assert weights.shape == (16,)
        assert abs(weights.sum()) < 1e-12

    def test_uniform_pattern_direction_required(self, layout):
        with pytest.raises(ConfigError):
            uniform_pattern(layout, (0.0, 0.0))


class TestSweep:
    """Test suite for simulated sweeps."""

    def test_reciprocity(self, sweep):
        data, refs = sweep
        for dataset in (*data, *refs):
            assert dataset.reciprocity_error() < 1e-8

    def test_order_and_metadata(self, sweep):
        data, refs = sweep
        assert [d.hz for d in data] == pytest.approx([1e3, 5e5])
        assert not data[0].meta["reference"]
        assert refs[0].meta["reference"]

    def test_perturbation_is_nonzero(self, sweep):
        data, refs = sweep
        diff = data[1].minus(refs[1])
        assert np.max(np.abs(diff.V)) > 1e-6
        assert diff.meta["difference"]

    def test_minus_rejects_other_frequency(self, sweep):
        data, refs = sweep
        with pytest.raises(DimensionMismatch):
            data[0].minus(refs[1])

    def test_combine_traces(self, sweep):
        data, _ = sweep
        weights = np.zeros(8)
        weights[2] = 1.0
        np.testing.assert_allclose(combine_traces(data[0], weights), data[0].traces[2])
        with pytest.raises(DimensionMismatch):
            combine_traces(data[0], np.ones(3))


class TestNoiseAndMasks:
    """Test suite for noise and masking."""

    def test_noise_is_seeded(self, sweep):
        data, _ = sweep
        a = add_noise(data[0], 40.0, seed=7)
        b = add_noise(data[0], 40.0, seed=7)
        np.testing.assert_array_equal(a.V, b.V)
        assert not np.array_equal(a.V, data[0].V)

    def test_noise_level(self, sweep):
        data, _ = sweep
        noisy = add_noise(data[0], 20.0, seed=1)
        ratio = np.mean(np.abs(noisy.V - data[0].V) ** 2) / np.mean(np.abs(data[0].V) ** 2)
        assert ratio == pytest.approx(0.01, rel=0.5)

    def test_infinite_snr_is_identity(self, sweep):
        data, _ = sweep
        assert add_noise(data[0], float("inf")) is data[0]

    def test_nonpositive_snr(self, sweep):
        data, _ = sweep
        with pytest.raises(ConfigError):
            add_noise(data[0], 0.0)

    def test_adjacent_mask(self):
        mask = adjacent_mask(4)
        assert mask.sum() == 12
        assert mask[0, 3] and mask[3, 0] and mask[1, 1]
        assert not mask[0, 2]

    def test_mask_adjacent_keeps_existing_flags(self, sweep):
        data, _ = sweep
        flagged = mask_adjacent(data[0])
        assert flagged.mask.sum() == 24


class TestDatasetFiles:
    """Test suite for dataset CSV files."""

    def test_write_then_read(self, tmp_path, sweep):
        data, _ = sweep
        dataset = mask_adjacent(data[1])
        voltages, traces = write_dataset(dataset, tmp_path / "data_01.csv")
        assert traces.name == "data_01_traces.csv"
        loaded = read_dataset(voltages)
        np.testing.assert_allclose(loaded.V, dataset.V, rtol=1e-15)
        np.testing.assert_allclose(loaded.traces, dataset.traces, rtol=1e-15)
        np.testing.assert_array_equal(loaded.mask, dataset.mask)
        assert loaded.omega == pytest.approx(dataset.omega, rel=1e-15)

    def test_incomplete_file(self, tmp_path, sweep):
        data, _ = sweep
        voltages, _ = write_dataset(data[0], tmp_path / "d.csv")
        lines = voltages.read_text().splitlines()
        voltages.write_text("\n".join(lines[:-3]) + "\n")
        with pytest.raises(IOFailure):
            read_dataset(voltages)

    def test_shape_validation(self):
        with pytest.raises(DimensionMismatch):
            BoundaryDataset(1.0, np.zeros((3, 2)), np.zeros((3, 4)), np.zeros(4))
