"""Price-relative matrices: loading, validation, slicing, and manifests.

A relatives matrix holds one row per period and one column per asset; entry
(t, i) is the gross return p_{t,i} / p_{t-1,i}. Matrices are immutable after
construction and safe to share across threads.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError

FORMAT_RELATIVES = "csv_relatives"
FORMAT_PRICES = "csv_prices"


@dataclass(frozen=True)
class RelativesMatrix:
    """n periods x m assets of positive price relatives."""

    values: np.ndarray
    asset_names: tuple[str, ...]
    period_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise DataError("relatives must be a 2-D table")
        n, m = vals.shape
        if n < 1:
            raise DataError("need at least one period")
        if m < 2:
            raise DataError(f"need at least two assets, got {m}")
        if len(self.asset_names) != m:
            raise DataError(f"{len(self.asset_names)} asset names for {m} columns")
        if self.period_labels is not None and len(self.period_labels) != n:
            raise DataError(f"{len(self.period_labels)} period labels for {n} rows")
        bad = np.argwhere(~(vals > 0) | ~np.isfinite(vals))
        if bad.size:
            r, c = bad[0]
            raise DataError("non-positive or non-finite relative", row=int(r) + 1, col=int(c) + 1)
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "asset_names", tuple(self.asset_names))
        if self.period_labels is not None:
            object.__setattr__(self, "period_labels", tuple(self.period_labels))

    @property
    def n_periods(self) -> int:
        return self.values.shape[0]

    @property
    def n_assets(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    region: str
    rows: int
    assets: int
    source_path: str

    def validate(self, mat: RelativesMatrix) -> None:
        if self.rows != mat.n_periods or self.assets != mat.n_assets:
            raise DataError(
                f"manifest says {self.rows}x{self.assets}, "
                f"matrix is {mat.n_periods}x{mat.n_assets}")


def _is_number(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def _read_table(path):
    with open(path, newline="") as f:
        rows = [r for r in csv.reader(f) if any(cell.strip() for cell in r)]
    if not rows:
        raise DataError(f"empty file: {path}")
    # header if the last cell of the first row is non-numeric; a leading
    # label column if the first cell of the first data row is non-numeric
    has_header = not _is_number(rows[0][-1])
    data = rows[1:] if has_header else rows
    if not data:
        raise DataError(f"no data rows in {path}")
    has_labels = not _is_number(data[0][0])
    width = len(data[0])
    grid = np.empty((len(data), width - (1 if has_labels else 0)))
    labels = [] if has_labels else None
    for r, rowcells in enumerate(data):
        if len(rowcells) != width:
            raise DataError("ragged row", row=r + 1)
        if has_labels:
            labels.append(rowcells[0].strip())
        for c, cell in enumerate(rowcells[1:] if has_labels else rowcells):
            try:
                grid[r, c] = float(cell)
            except ValueError:
                raise DataError(f"non-numeric cell {cell!r}", row=r + 1, col=c + 1)
    if has_header:
        names = [cell.strip() for cell in (rows[0][1:] if has_labels else rows[0])]
    else:
        names = [f"asset_{i + 1}" for i in range(grid.shape[1])]
    return grid, names, tuple(labels) if labels else None


def load_relatives(path, fmt: str = FORMAT_RELATIVES) -> RelativesMatrix:
    """Load a relatives matrix from CSV.

    ``csv_relatives`` passes the values through after validation;
    ``csv_prices`` expects positive closing prices and converts row t to
    p_t / p_{t-1} elementwise (one fewer output row).
    """
    grid, names, labels = _read_table(path)
    if fmt == FORMAT_RELATIVES:
        return RelativesMatrix(grid, names, labels)
    if fmt == FORMAT_PRICES:
        if grid.shape[0] < 2:
            raise DataError("price conversion needs at least two rows")
        bad = np.argwhere(~(grid > 0) | ~np.isfinite(grid))
        if bad.size:
            r, c = bad[0]
            raise DataError("non-positive price", row=int(r) + 1, col=int(c) + 1)
        rel = grid[1:] / grid[:-1]
        return RelativesMatrix(rel, names, labels[1:] if labels else None)
    raise DataError(f"unknown format {fmt!r}")


def write_relatives(mat: RelativesMatrix, path) -> None:
    """Write CSV that reloads bit-identically (full-precision floats)."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        head = list(mat.asset_names)
        if mat.period_labels is not None:
            head = ["period"] + head
        w.writerow(head)
        for t in range(mat.n_periods):
            row = [repr(float(v)) for v in mat.values[t]]
            if mat.period_labels is not None:
                row = [mat.period_labels[t]] + row
            w.writerow(row)


def slice_window(mat: RelativesMatrix, end_t: int, width: int) -> RelativesMatrix:
    """Rows end_t - width + 1 .. end_t (1-based, inclusive), order preserved."""
    if not (1 <= width <= end_t <= mat.n_periods):
        raise IndexError(
            f"window width={width}, end_t={end_t} outside 1..{mat.n_periods}")
    lo = end_t - width
    labels = mat.period_labels[lo:end_t] if mat.period_labels else None
    return RelativesMatrix(mat.values[lo:end_t].copy(), mat.asset_names, labels)


def load_manifest(path) -> DatasetManifest:
    with open(path) as f:
        doc = json.load(f)
    try:
        return DatasetManifest(
            name=str(doc["name"]), region=str(doc["region"]),
            rows=int(doc["rows"]), assets=int(doc["assets"]),
            source_path=str(doc["source_path"]))
    except KeyError as e:
        raise DataError(f"manifest missing field {e}")


def save_manifest(manifest: DatasetManifest, path) -> None:
    doc = {"name": manifest.name, "region": manifest.region,
           "rows": manifest.rows, "assets": manifest.assets,
           "source_path": manifest.source_path}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
