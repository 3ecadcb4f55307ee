"""
File formats: effects tables, parameter maps, result tables and PGM slices.

All writers are byte-deterministic: floats use the shortest round-trip
representation, lines end in ``\\n`` and nothing depends on locale or time.
"""

import csv
import json
import math
from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path
from typing import Any

import numpy as np

from ..utils.constants import EFFECTS_MAGIC, PGM_MAXVAL
from ..utils.logger import get_logger
from .errors import IndexOutOfRange, InvariantViolation, LengthMismatch, ParseError
from .models import EffectsTable, ParameterMapRecord, VoxelFit

logger = get_logger(__name__)

AXIS_NAMES = {"x": 0, "y": 1, "z": 2}


def format_value(value: Any) -> str:
    """Render one table cell."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
    return path


class EffectsFileParser:
    """Line-level parser for the PREVMAP-EFFECTS v1 text format."""

    @staticmethod
    def _header_ints(line: str, keyword: str, count: int, lineno: int) -> list[int]:
        parts = line.split()
        if len(parts) != count + 1 or parts[0] != keyword:
            raise ParseError(f"expected '{keyword}' followed by {count} integer(s)", lineno)
        try:
            values = [int(p) for p in parts[1:]]
        except ValueError as e:
            raise ParseError(f"non-integer value in '{keyword}' line", lineno) from e
        if min(values) < (1 if keyword != "voxels" else 0):
            raise ParseError(f"'{keyword}' values out of range", lineno)
        return values

    @staticmethod
    def parse_row(line: str, n_subjects: int, lineno: int) -> tuple[int, list[float]]:
        fields = line.split(",")
        if len(fields) != n_subjects + 1:
            raise ParseError(
                f"expected {n_subjects} effect values, found {len(fields) - 1}", lineno
            )
        try:
            index = int(fields[0])
        except ValueError as e:
            raise ParseError(f"invalid voxel index '{fields[0]}'", lineno) from e
        try:
            values = [float(v) for v in fields[1:]]
        except ValueError as e:
            raise ParseError(f"invalid effect value: {e}", lineno) from e
        return index, values

    @classmethod
    def parse(cls, lines: list[str]) -> EffectsTable:
        if not lines or lines[0].strip() != EFFECTS_MAGIC:
            raise ParseError(f"missing '{EFFECTS_MAGIC}' header", 1)
        if len(lines) < 4:
            raise ParseError("truncated header", len(lines) + 1)

        dims = cls._header_ints(lines[1], "dims", 3, 2)
        (n_subjects,) = cls._header_ints(lines[2], "subjects", 1, 3)
        (n_voxels,) = cls._header_ints(lines[3], "voxels", 1, 4)

        body = lines[4:]
        while body and not body[-1].strip():
            body.pop()
        if len(body) < n_voxels:
            raise ParseError(
                f"expected {n_voxels} voxel rows, found {len(body)}", 5 + len(body)
            )
        if len(body) > n_voxels:
            raise ParseError("unexpected rows after the declared voxels", 5 + n_voxels)

        index = np.empty(n_voxels, dtype=np.int64)
        effects = np.empty((n_voxels, n_subjects), dtype=float)
        for row, line in enumerate(body):
            index[row], effects[row] = cls.parse_row(line.strip(), n_subjects, row + 5)

        return EffectsTable(dims=tuple(dims), voxel_index=index, effects=effects)


def read_effects_table(path: str | Path) -> EffectsTable:
    """Read a PREVMAP-EFFECTS v1 file.

    Raises:
        ParseError: malformed file, with the offending line number
        InvariantViolation: well-formed file whose table breaks an invariant
    """
    with open(path, encoding="utf-8") as f:
        lines = f.read().split("\n")
    table = EffectsFileParser.parse(lines)
    logger.debug(
        f"Read {table.n_voxels} voxels x {table.n_subjects} subjects from {path}"
    )
    return table


def write_effects_table(path: str | Path, table: EffectsTable) -> Path:
    """Write ``table`` in the PREVMAP-EFFECTS v1 format."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    nx, ny, nz = table.dims
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(f"{EFFECTS_MAGIC}\n")
        f.write(f"dims {nx} {ny} {nz}\n")
        f.write(f"subjects {table.n_subjects}\n")
        f.write(f"voxels {table.n_voxels}\n")
        for idx, row in zip(table.voxel_index, table.effects):
            f.write(str(int(idx)))
            for value in row:
                f.write(",")
                f.write(repr(float(value)))
            f.write("\n")
    return path


def write_parameter_map(path: str | Path, records: Iterable[ParameterMapRecord]) -> Path:
    """Write parameter-map records sorted by voxel index."""
    ordered = sorted(records, key=lambda r: r.voxel_index)
    return _write_csv(path, ParameterMapRecord.HEADER, (r.values() for r in ordered))


def read_parameter_map(path: str | Path) -> list[ParameterMapRecord]:
    """Read a parameter-map CSV written by :func:`write_parameter_map`."""
    records = []
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(header) != ParameterMapRecord.HEADER:
            raise ParseError("parameter map header does not match", 1)
        for row in reader:
            lineno = reader.line_num
            if not row:
                continue
            if len(row) != len(ParameterMapRecord.HEADER):
                raise ParseError(
                    f"expected {len(ParameterMapRecord.HEADER)} fields, found {len(row)}",
                    lineno,
                )
            values: dict[str, Any] = {}
            try:
                for name, text in zip(ParameterMapRecord.HEADER, row):
                    values[name] = (
                        int(text) if name in ParameterMapRecord.INT_FIELDS else float(text)
                    )
            except ValueError as e:
                raise ParseError(f"invalid value: {e}", lineno) from e
            records.append(ParameterMapRecord(**values))
    return records


def record_to_fit(record: ParameterMapRecord) -> VoxelFit:
    """Rebuild the fit stored in a parameter-map row."""
    return VoxelFit(
        params=record.params(),
        loglik=record.loglik,
        converged=True,
        n_iter=0,
        thresholded=bool(record.thresholded),
    )


def _resolve_axis(axis: int | str) -> int:
    if isinstance(axis, str):
        if axis.lower() not in AXIS_NAMES:
            raise IndexOutOfRange(f"unknown axis '{axis}'")
        return AXIS_NAMES[axis.lower()]
    if axis not in (0, 1, 2):
        raise IndexOutOfRange(f"axis {axis} outside 0..2")
    return int(axis)


def format_pgm_slice(
    volume: np.ndarray,
    axis: int | str,
    slice_index: int,
    value_range: tuple[float, float],
    mask: np.ndarray | None = None,
) -> str:
    """Plain PGM (P2) rendering of one slice of ``volume``.

    Values are clamped to ``value_range`` and mapped linearly onto 0..255
    with half-up rounding. Voxels outside ``mask`` or holding NaN render as 0.
    The image width runs along the lower remaining axis.
    """
    volume = np.asarray(volume, dtype=float)
    if volume.ndim == 2:
        volume = volume[:, :, None]
    if volume.ndim != 3:
        raise InvariantViolation("volume must be 2D or 3D")
    ax = _resolve_axis(axis)
    if not 0 <= slice_index < volume.shape[ax]:
        raise IndexOutOfRange(
            f"slice {slice_index} outside 0..{volume.shape[ax] - 1} on axis {ax}"
        )
    lo, hi = (float(v) for v in value_range)
    if not lo < hi:
        raise InvariantViolation(f"value range must satisfy min < max, got {value_range}")

    plane = np.take(volume, slice_index, axis=ax)
    valid = np.isfinite(plane)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.ndim == 2:
            mask = mask[:, :, None]
        valid &= np.take(mask, slice_index, axis=ax)

    scaled = (np.clip(np.where(valid, plane, lo), lo, hi) - lo) / (hi - lo)
    pixels = np.floor(scaled * PGM_MAXVAL + 0.5).astype(int)
    pixels[~valid] = 0

    image = pixels.T  # rows follow the second remaining axis
    height, width = image.shape
    lines = ["P2", f"{width} {height}", str(PGM_MAXVAL)]
    lines.extend(" ".join(str(int(p)) for p in row) for row in image)
    return "\n".join(lines) + "\n"


def render_pgm_slice(
    path: str | Path,
    volume: np.ndarray,
    axis: int | str,
    slice_index: int,
    value_range: tuple[float, float],
    mask: np.ndarray | None = None,
) -> Path:
    """Write :func:`format_pgm_slice` output to ``path``."""
    text = format_pgm_slice(volume, axis, slice_index, value_range, mask)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="ascii", newline="") as f:
        f.write(text)
    return path


def write_truth(path: str | Path, table: EffectsTable, true_prevalence: np.ndarray) -> Path:
    """Per-voxel true prevalence of a toy population."""
    flat = np.asarray(true_prevalence, dtype=float).ravel(order="F")[table.voxel_index]
    coords = table.coordinates()
    rows = (
        (int(idx), *map(int, xyz), float(value))
        for idx, xyz, value in zip(table.voxel_index, coords, flat)
    )
    return _write_csv(path, ("voxel_index", "x", "y", "z", "true_prevalence"), rows)


def write_effect_maps(path: str | Path, table: EffectsTable, maps: Mapping[str, np.ndarray]) -> Path:
    """Per-voxel maps side by side, one column per map in the given order."""
    columns = [np.asarray(values, dtype=float) for values in maps.values()]
    for name, values in zip(maps, columns):
        if values.shape != (table.n_voxels,):
            raise LengthMismatch(f"map '{name}' has {values.size} values for {table.n_voxels} voxels")
    coords = table.coordinates()
    rows = (
        (int(idx), *map(int, xyz), *(float(c[row]) for c in columns))
        for row, (idx, xyz) in enumerate(zip(table.voxel_index, coords))
    )
    return _write_csv(path, ("voxel_index", "x", "y", "z", *maps), rows)


def write_region_table(path: str | Path, regions: Sequence[Any]) -> Path:
    """One row per region: size, bounding box extents and complexity ratio."""
    header = ("region_id", "size", "x_min", "x_max", "y_min", "y_max", "z_min", "z_max", "complexity")
    rows = []
    for region_id, region in enumerate(regions):
        bounds = list(region.bbox) + [(0, 0)] * (3 - len(region.bbox))
        flat_bounds = [v for pair in bounds for v in pair]
        rows.append((region_id, region.size, *flat_bounds, region.complexity))
    return _write_csv(path, header, rows)


def write_agreement(path: str | Path, rows: Iterable[tuple[int, str, float]]) -> Path:
    return _write_csv(path, ("split", "statistic", "dice"), rows)


def write_gof_table(path: str | Path, result: Any) -> Path:
    """Long-format KS table; failed fits leave the ``ks`` cell empty."""
    rows = []
    for row, idx in enumerate(result.voxel_index):
        for col, family in enumerate(result.families):
            value = result.ks[row, col]
            rows.append((int(idx), family.value, None if math.isnan(value) else float(value)))
    return _write_csv(path, ("voxel_index", "family", "ks"), rows)


def write_gof_summary(path: str | Path, summaries: Sequence[Any]) -> Path:
    header = ("family", "n", "n_missing", "median", "q1", "q3", "whisker_low", "whisker_high")
    rows = (
        (s.family.value, s.n, s.n_missing, s.median, s.q1, s.q3, s.whisker_low, s.whisker_high)
        for s in summaries
    )
    return _write_csv(path, header, rows)


def write_power_curve(path: str | Path, points: Sequence[Any]) -> Path:
    header = ("p", "power_t", "se_t", "power_wilcoxon", "se_wilcoxon")
    rows = ((pt.p, pt.power_t, pt.se_t, pt.power_wilcoxon, pt.se_wilcoxon) for pt in points)
    return _write_csv(path, header, rows)


def write_are_report(path: str | Path, are: float, efficacy_t: float, efficacy_w: float) -> Path:
    """Single-line efficiency report."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    line = (
        f"pitman_are {format_value(float(are))} "
        f"efficacy_t {format_value(float(efficacy_t))} "
        f"efficacy_signed_rank {format_value(float(efficacy_w))}\n"
    )
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(line)
    return path


def write_json(path: str | Path, payload: dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    return path
