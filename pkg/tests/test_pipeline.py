"""
Tests for the voxel-parallel drivers and the comparison maps.
"""

import numpy as np
import pytest

from prevmap.core.errors import InvariantViolation
from prevmap.core.models import EffectsTable
from prevmap.services.pipeline import (
    effect_maps,
    fit_table,
    map_rows,
    smoothed_t_table,
    t_table,
)


def _table(rng: np.random.Generator, dims=(6, 5, 1), n_subjects=12, keep=None) -> EffectsTable:
    n_grid = dims[0] * dims[1] * dims[2]
    index = np.arange(n_grid) if keep is None else np.flatnonzero(keep)
    effects = rng.normal(0.3, 1.0, size=(index.size, n_subjects))
    return EffectsTable(dims=dims, voxel_index=index, effects=effects)


class TestMapRows:
    def test_order_independent_of_workers(self, rng):
        rows = rng.normal(size=(50, 4))
        serial = map_rows(np.sum, rows, workers=1)
        parallel = map_rows(np.sum, rows, workers=3)
        np.testing.assert_array_equal(serial, parallel)

    def test_progress_counts_every_row(self, rng):
        done = []
        map_rows(np.mean, rng.normal(size=(17, 3)), workers=1, progress=done.append)
        assert sum(done) == 17


class TestTTables:
    def test_zero_variance_voxel_is_zero(self, rng):
        table = _table(rng)
        effects = table.effects.copy()
        effects[0] = 2.0
        flat = EffectsTable(dims=table.dims, voxel_index=table.voxel_index, effects=effects)
        assert t_table(flat)[0] == 0.0

    def test_no_smoothing_matches_t(self, rng):
        table = _table(rng)
        np.testing.assert_array_equal(smoothed_t_table(table, 0.0), t_table(table))

    def test_spatially_constant_maps_are_unchanged(self, rng):
        # every voxel carries the same subject values, so a normalized
        # average of neighbours returns them, at the edges and next to the mask
        keep = np.ones(30, dtype=bool)
        keep[[3, 11, 12, 20]] = False
        subjects = rng.normal(0.4, 1.0, size=9)
        table = EffectsTable(
            dims=(6, 5, 1),
            voxel_index=np.flatnonzero(keep),
            effects=np.tile(subjects, (int(keep.sum()), 1)),
        )
        np.testing.assert_allclose(smoothed_t_table(table, 3.0), t_table(table), rtol=1e-9)

    def test_smoothing_correlates_neighbours(self, rng):
        table = _table(rng, dims=(60, 1, 1), n_subjects=20)
        raw, smoothed = t_table(table), smoothed_t_table(table, 4.0)
        assert np.corrcoef(raw[:-1], raw[1:])[0, 1] < 0.5
        assert np.corrcoef(smoothed[:-1], smoothed[1:])[0, 1] > 0.5

    def test_negative_fwhm(self, rng):
        with pytest.raises(InvariantViolation):
            smoothed_t_table(_table(rng), -1.0)


class TestEffectMaps:
    def test_columns(self, rng, fast_opts):
        table = _table(rng, dims=(3, 3, 1), n_subjects=20)
        fits = fit_table(table, fast_opts)
        signed = np.linspace(-1.0, 1.0, table.n_voxels)
        maps = effect_maps(table, fits, signed, fwhm=2.0)
        assert list(maps) == ["prevalence", "mu", "t", "t_smoothed"]
        assert all(values.shape == (9,) for values in maps.values())
        np.testing.assert_array_equal(maps["prevalence"], signed)
        np.testing.assert_array_equal(maps["mu"], [fit.params.mu for fit in fits])
