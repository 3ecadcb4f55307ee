"""
Tests for the effects table format, parameter maps and result writers.
"""

import numpy as np
import pytest

from prevmap.core.errors import IndexOutOfRange, InvariantViolation, LengthMismatch, ParseError
from prevmap.core.models import EffectsTable, MixtureParams, ParameterMapRecord, VoxelFit
from prevmap.core.storage import (
    format_pgm_slice,
    format_value,
    read_effects_table,
    read_parameter_map,
    record_to_fit,
    render_pgm_slice,
    write_are_report,
    write_effect_maps,
    write_effects_table,
    write_gof_summary,
    write_parameter_map,
    write_truth,
)
from prevmap.services.gof import CandidateFamily, FamilySummary


def _write_lines(path, *lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _record(voxel_index: int, **overrides) -> ParameterMapRecord:
    fields = dict(
        voxel_index=voxel_index, x=voxel_index, y=0, z=0,
        p1=0.5, p2=0.3, p3=0.2, mu=1.25, var1=0.1, var2=1.0, var3=0.3,
        loglik=-12.5, thresholded=0,
        wilcoxon_stat=40.0, p_value=0.01, q_value=0.02, reject=1, signed_prevalence=0.2,
    )
    fields.update(overrides)
    return ParameterMapRecord(**fields)


class TestEffectsFile:
    def test_round_trip(self, tmp_path, rng):
        table = EffectsTable(
            dims=(4, 3, 2), voxel_index=[0, 5, 23], effects=rng.normal(size=(3, 7)) * 1e-3
        )
        path = write_effects_table(tmp_path / "effects.txt", table)
        loaded = read_effects_table(path)
        assert loaded.dims == (4, 3, 2)
        np.testing.assert_array_equal(loaded.voxel_index, table.voxel_index)
        np.testing.assert_array_equal(loaded.effects, table.effects)

    def test_header_layout(self, tmp_path):
        table = EffectsTable(dims=(2, 1, 1), voxel_index=[1], effects=[[0.5, -1.0]])
        text = write_effects_table(tmp_path / "e.txt", table).read_text()
        assert text == "PREVMAP-EFFECTS v1\ndims 2 1 1\nsubjects 2\nvoxels 1\n1,0.5,-1.0\n"

    def test_short_row_reports_line(self, tmp_path):
        path = _write_lines(
            tmp_path / "bad.txt",
            "PREVMAP-EFFECTS v1", "dims 2 2 1", "subjects 3", "voxels 2",
            "0,1.0,2.0,3.0", "1,1.0,2.0",
        )
        with pytest.raises(ParseError) as excinfo:
            read_effects_table(path)
        assert excinfo.value.line == 6
        assert "line 6" in str(excinfo.value)

    def test_missing_magic(self, tmp_path):
        path = _write_lines(tmp_path / "bad.txt", "dims 1 1 1", "subjects 1", "voxels 0")
        with pytest.raises(ParseError):
            read_effects_table(path)

    def test_missing_rows(self, tmp_path):
        path = _write_lines(
            tmp_path / "bad.txt", "PREVMAP-EFFECTS v1", "dims 2 1 1", "subjects 1", "voxels 2", "0,1.0"
        )
        with pytest.raises(ParseError):
            read_effects_table(path)

    def test_non_numeric_effect(self, tmp_path):
        path = _write_lines(
            tmp_path / "bad.txt", "PREVMAP-EFFECTS v1", "dims 1 1 1", "subjects 2", "voxels 1", "0,1.0,abc"
        )
        with pytest.raises(ParseError) as excinfo:
            read_effects_table(path)
        assert excinfo.value.line == 5

    def test_duplicate_index(self, tmp_path):
        path = _write_lines(
            tmp_path / "dup.txt",
            "PREVMAP-EFFECTS v1", "dims 3 1 1", "subjects 1", "voxels 2", "1,0.5", "1,0.7",
        )
        with pytest.raises(InvariantViolation, match="duplicate"):
            read_effects_table(path)

    def test_index_outside_grid(self, tmp_path):
        path = _write_lines(
            tmp_path / "oob.txt", "PREVMAP-EFFECTS v1", "dims 2 1 1", "subjects 1", "voxels 1", "2,0.5"
        )
        with pytest.raises(InvariantViolation):
            read_effects_table(path)


class TestParameterMap:
    def test_empty_map_has_header_only(self, tmp_path):
        path = write_parameter_map(tmp_path / "map.csv", [])
        assert path.read_text() == ",".join(ParameterMapRecord.HEADER) + "\n"
        assert read_parameter_map(path) == []

    def test_round_trip_sorted(self, tmp_path):
        records = [_record(7), _record(2, thresholded=1, p1=0.6, p2=0.4, p3=0.0, mu=0.0, reject=0)]
        path = write_parameter_map(tmp_path / "map.csv", records)
        loaded = read_parameter_map(path)
        assert [r.voxel_index for r in loaded] == [2, 7]
        assert loaded == sorted(records, key=lambda r: r.voxel_index)

    def test_header_mismatch(self, tmp_path):
        path = _write_lines(tmp_path / "map.csv", "voxel_index,x,y")
        with pytest.raises(ParseError):
            read_parameter_map(path)

    def test_record_to_fit(self):
        params = MixtureParams(p1=0.5, p2=0.3, p3=0.2, mu=1.25, var1=0.1, var2=1.0, var3=0.3)
        fit = VoxelFit(params=params, loglik=-12.5, converged=True, n_iter=9)
        record = ParameterMapRecord.from_fit(3, (3, 0, 0), fit)
        rebuilt = record_to_fit(record)
        assert rebuilt.params == params
        assert rebuilt.loglik == -12.5 and not rebuilt.thresholded


class TestPgmSlice:
    def test_linear_mapping(self):
        volume = np.array([[-1.0, 0.0], [1.0, 5.0]])
        text = format_pgm_slice(volume, "z", 0, (-1.0, 1.0))
        assert text == "P2\n2 2\n255\n0 255\n128 255\n"

    def test_nan_and_masked_render_black(self):
        volume = np.array([[np.nan, 1.0], [1.0, 1.0]])
        mask = np.array([[True, True], [False, True]])
        assert format_pgm_slice(volume, 2, 0, (0.0, 1.0), mask).splitlines()[3:] == ["0 0", "255 255"]

    def test_slice_along_x(self):
        volume = np.zeros((3, 4, 2))
        header = format_pgm_slice(volume, "x", 1, (0.0, 1.0)).splitlines()[:3]
        assert header == ["P2", "4 2", "255"]

    def test_slice_out_of_range(self):
        with pytest.raises(IndexOutOfRange):
            format_pgm_slice(np.zeros((2, 2, 2)), "z", 2, (0.0, 1.0))

    def test_unknown_axis(self):
        with pytest.raises(IndexOutOfRange):
            format_pgm_slice(np.zeros((2, 2, 2)), "w", 0, (0.0, 1.0))

    def test_invalid_range(self):
        with pytest.raises(InvariantViolation):
            format_pgm_slice(np.zeros((2, 2)), "z", 0, (1.0, 1.0))

    def test_render_writes_file(self, tmp_path):
        path = render_pgm_slice(tmp_path / "out" / "slice.pgm", np.ones((2, 2)), "z", 0, (0.0, 1.0))
        assert path.read_text().startswith("P2\n")


class TestResultWriters:
    def test_format_value(self):
        assert format_value(None) == ""
        assert format_value(True) == "1"
        assert format_value(np.int64(4)) == "4"
        assert format_value(0.1) == "0.1"

    def test_are_report_line(self, tmp_path):
        path = write_are_report(tmp_path / "are.txt", 0.5, 2.0, 1.25)
        assert path.read_text() == "pitman_are 0.5 efficacy_t 2.0 efficacy_signed_rank 1.25\n"

    def test_truth_table(self, tmp_path):
        table = EffectsTable(dims=(2, 2, 1), voxel_index=[1, 2], effects=[[0.0], [1.0]])
        prevalence = np.array([[0.0, 0.25], [0.5, 1.0]])[:, :, None]
        lines = write_truth(tmp_path / "truth.csv", table, prevalence).read_text().splitlines()
        assert lines == ["voxel_index,x,y,z,true_prevalence", "1,1,0,0,0.5", "2,0,1,0,0.25"]

    def test_gof_summary_without_values(self, tmp_path):
        summary = FamilySummary.from_values(CandidateFamily.GAUSSIAN, np.array([np.nan]))
        lines = write_gof_summary(tmp_path / "s.csv", [summary]).read_text().splitlines()
        assert lines[1].startswith("gaussian,0,1,")

    def test_effect_maps_table(self, tmp_path):
        table = EffectsTable(dims=(2, 2, 1), voxel_index=[0, 3], effects=[[0.0], [1.0]])
        maps = {"prevalence": np.array([0.5, -0.25]), "t": np.array([2.0, 0.0])}
        lines = write_effect_maps(tmp_path / "maps.csv", table, maps).read_text().splitlines()
        assert lines == ["voxel_index,x,y,z,prevalence,t", "0,0,0,0,0.5,2.0", "3,1,1,0,-0.25,0.0"]

    def test_effect_maps_length_mismatch(self, tmp_path):
        table = EffectsTable(dims=(2, 2, 1), voxel_index=[0, 3], effects=[[0.0], [1.0]])
        with pytest.raises(LengthMismatch):
            write_effect_maps(tmp_path / "maps.csv", table, {"t": np.zeros(3)})
