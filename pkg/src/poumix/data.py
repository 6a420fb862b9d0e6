"""Synthetic regression problems and file ingestion.

Scattered data lives in CSV files with header ``x1,...,xd,y``; snapshot
databases (many label fields over one shared set of node coordinates) use a
wide CSV with header ``x1,...,xd,y_1,...,y_K`` or a directory holding
``coords.csv`` plus one single-column labels file per snapshot. Loaders
reject malformed input with the offending line number instead of repairing
it. All floats are written with 17 significant digits so files round-trip
bit-exactly.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InputError, ParseError

FLOAT_FMT = "%.17g"


@dataclass(frozen=True)
class Dataset:
    """Scattered samples: coordinates x (N, d) and labels y (N,).

    ``noise_std`` carries the true per-sample noise level for synthetic
    problems that have one; loaders leave it None.
    """

    x: np.ndarray
    y: np.ndarray
    noise_std: np.ndarray | None = None

    @property
    def num_samples(self) -> int:
        return self.x.shape[0]

    @property
    def input_dim(self) -> int:
        return self.x.shape[1]


def make_dataset(x, y, noise_std=None) -> Dataset:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if x.shape[0] != y.shape[0]:
        raise DimensionError(f"{x.shape[0]} coordinate rows but {y.shape[0]} labels")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InputError("dataset contains non-finite values")
    if noise_std is not None:
        noise_std = np.asarray(noise_std, dtype=float).ravel()
        if noise_std.shape[0] != y.shape[0]:
            raise DimensionError("noise_std length does not match labels")
    return Dataset(x=x, y=y, noise_std=noise_std)


@dataclass(frozen=True)
class SnapshotDatabase:
    """K label fields sampled on one shared set of node coordinates."""

    x: np.ndarray           # (num_nodes, d)
    snapshots: np.ndarray   # (K, num_nodes)
    names: tuple            # K identifiers

    @property
    def num_nodes(self) -> int:
        return self.x.shape[0]

    @property
    def num_snapshots(self) -> int:
        return self.snapshots.shape[0]


# ---------------------------------------------------------------- generators

def gen_sin1d(n: int, seed: int = 0) -> Dataset:
    """One period of a sine on [0, 1], sampled evenly, no noise."""
    if n < 2:
        raise InputError("need at least 2 samples")
    x = np.linspace(0.0, 1.0, n)
    return make_dataset(x[:, None], np.sin(2.0 * np.pi * x))


def gen_tanh_noisy(n: int = 1000, seed: int = 0) -> Dataset:
    """Sharp tanh step on [0, 1] with spatially varying Gaussian noise.

    The noise std is |0.3 sin 2 pi x|: largest mid-slope on each half,
    vanishing at the ends and at the center.
    """
    if n < 2:
        raise InputError("need at least 2 samples")
    rng = np.random.default_rng(seed)
    x = np.linspace(0.0, 1.0, n)
    std = np.abs(0.3 * np.sin(2.0 * np.pi * x))
    y = 1.0 + np.tanh(10.0 * (x - 0.5)) + rng.standard_normal(n) * std
    return make_dataset(x[:, None], y, noise_std=std)


def gen_sin2d(n: int, seed: int = 0) -> Dataset:
    """Product of sines on the unit square, points uniform at random."""
    if n < 2:
        raise InputError("need at least 2 samples")
    rng = np.random.default_rng(seed)
    x = rng.uniform(size=(n, 2))
    y = np.sin(2.0 * np.pi * x[:, 0]) * np.sin(2.0 * np.pi * x[:, 1])
    return make_dataset(x, y)


def lift_to_4d(data: Dataset) -> Dataset:
    """Embed 2D points as (x1, x2, x2^2, 0): ambient dimension 4, data still
    on a 2-dimensional manifold. Labels unchanged."""
    if data.input_dim != 2:
        raise DimensionError(f"lift expects 2D data, got {data.input_dim}D")
    x1, x2 = data.x[:, 0], data.x[:, 1]
    lifted = np.column_stack([x1, x2, x2 ** 2, np.zeros_like(x1)])
    return Dataset(x=lifted, y=data.y, noise_std=data.noise_std)


def gen_plateau_snapshots(num_nodes: int = 4000, num_snapshots: int = 20,
                          num_plateaus: int = 10, snapshot_spread: float = 0.25,
                          noise_std: float = 0.02, seed: int = 0) -> SnapshotDatabase:
    """Family of piecewise-constant fields over shared random 2D nodes.

    The unit square is cut into vertical bands; band p sits near level p in
    every snapshot, shifted per snapshot by N(0, snapshot_spread) and
    dithered per node by N(0, noise_std). Levels stay well separated, so the
    bands are recoverable from the labels alone.
    """
    if num_nodes < 1 or num_snapshots < 1 or num_plateaus < 1:
        raise InputError("num_nodes, num_snapshots and num_plateaus must be >= 1")
    rng = np.random.default_rng(seed)
    x = rng.uniform(size=(num_nodes, 2))
    band = np.minimum((x[:, 0] * num_plateaus).astype(int), num_plateaus - 1)
    offsets = rng.normal(0.0, snapshot_spread, size=(num_snapshots, num_plateaus))
    dither = rng.normal(0.0, noise_std, size=(num_snapshots, num_nodes))
    levels = np.arange(num_plateaus, dtype=float)
    snapshots = levels[band][None, :] + offsets[:, band] + dither
    names = tuple(f"y_{k + 1}" for k in range(num_snapshots))
    return SnapshotDatabase(x=x, snapshots=snapshots, names=names)


def concat_snapshots(db: SnapshotDatabase) -> Dataset:
    """Stack all snapshots into one dataset, snapshot-major: rows
    [k*num_nodes, (k+1)*num_nodes) hold snapshot k, so per-snapshot slices
    are recoverable by index arithmetic."""
    x = np.tile(db.x, (db.num_snapshots, 1))
    return make_dataset(x, db.snapshots.ravel())


# ------------------------------------------------------------------- CSV I/O

def _data_lines(path):
    """Yield (1-based line number, comma-split cells), skipping comments and
    blank lines."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = fh.readlines()
    except OSError as err:
        raise ParseError(str(err), path=str(path)) from err
    for lineno, line in enumerate(raw, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        yield lineno, [cell.strip() for cell in stripped.split(",")]


def _parse_rows(path, rows, width, lineno_of):
    out = np.empty((len(rows), width))
    for r, cells in enumerate(rows):
        if len(cells) != width:
            raise ParseError(
                f"expected {width} columns, found {len(cells)}",
                path=str(path), line=lineno_of[r],
            )
        for c, cell in enumerate(cells):
            try:
                out[r, c] = float(cell)
            except ValueError:
                raise ParseError(
                    f"non-numeric value {cell!r} in column {c + 1}",
                    path=str(path), line=lineno_of[r],
                ) from None
    return out


def _read_table(path):
    """Header cells, data rows, and their line numbers."""
    lines = list(_data_lines(path))
    if not lines:
        raise ParseError("empty file", path=str(path))
    (header_line, header), body = lines[0], lines[1:]
    if not body:
        raise ParseError("no data rows after the header", path=str(path),
                         line=header_line)
    return header, [cells for _, cells in body], [lineno for lineno, _ in body]


def _check_x_header(header, path):
    for d, name in enumerate(header, start=1):
        if name != f"x{d}":
            raise ParseError(
                f"expected coordinate column 'x{d}', found {name!r}",
                path=str(path), line=1,
            )


def load_scattered_csv(path) -> Dataset:
    """Read a scattered-data CSV with header x1,...,xd,y."""
    header, rows, linenos = _read_table(path)
    if len(header) < 2 or header[-1] != "y":
        raise ParseError(
            f"header must be x1,...,xd,y; found {','.join(header)!r}",
            path=str(path), line=1,
        )
    _check_x_header(header[:-1], path)
    table = _parse_rows(path, rows, len(header), linenos)
    bad = np.flatnonzero(~np.isfinite(table).all(axis=1))
    if bad.size:
        raise ParseError("non-finite value", path=str(path), line=linenos[bad[0]])
    return make_dataset(table[:, :-1], table[:, -1])


def load_points_csv(path) -> np.ndarray:
    """Read bare coordinates from a CSV with header x1,...,xd."""
    header, rows, linenos = _read_table(path)
    _check_x_header(header, path)
    table = _parse_rows(path, rows, len(header), linenos)
    bad = np.flatnonzero(~np.isfinite(table).all(axis=1))
    if bad.size:
        raise ParseError("non-finite value", path=str(path), line=linenos[bad[0]])
    return table


def save_scattered_csv(path, data: Dataset) -> None:
    header = ",".join([f"x{d + 1}" for d in range(data.input_dim)] + ["y"])
    table = np.column_stack([data.x, data.y])
    _atomic_write_table(path, header, table)


def load_snapshot_db(path) -> SnapshotDatabase:
    """Read a snapshot database from a wide CSV or a directory layout."""
    if os.path.isdir(path):
        return _load_snapshot_dir(path)
    header, rows, linenos = _read_table(path)
    num_labels = sum(1 for name in header if name.startswith("y_"))
    dim = len(header) - num_labels
    if num_labels < 1 or dim < 1:
        raise ParseError(
            "header must be x1,...,xd,y_1,...,y_K",
            path=str(path), line=1,
        )
    _check_x_header(header[:dim], path)
    for k, name in enumerate(header[dim:], start=1):
        if name != f"y_{k}":
            raise ParseError(
                f"expected label column 'y_{k}', found {name!r}",
                path=str(path), line=1,
            )
    table = _parse_rows(path, rows, len(header), linenos)
    if not np.all(np.isfinite(table)):
        raise ParseError("non-finite values in table", path=str(path))
    return SnapshotDatabase(x=table[:, :dim], snapshots=table[:, dim:].T.copy(),
                            names=tuple(header[dim:]))


def _load_snapshot_dir(path) -> SnapshotDatabase:
    coords_path = os.path.join(path, "coords.csv")
    if not os.path.exists(coords_path):
        raise ParseError("directory layout requires coords.csv", path=str(path))
    header, rows, linenos = _read_table(coords_path)
    _check_x_header(header, coords_path)
    x = _parse_rows(coords_path, rows, len(header), linenos)

    label_files = sorted(
        name for name in os.listdir(path)
        if name.endswith(".csv") and name != "coords.csv"
    )
    if not label_files:
        raise ParseError("no snapshot label files next to coords.csv", path=str(path))
    snapshots = []
    for name in label_files:
        label_path = os.path.join(path, name)
        lheader, lrows, llinenos = _read_table(label_path)
        if lheader != ["y"]:
            raise ParseError("label files must have the single column 'y'",
                             path=label_path, line=1)
        column = _parse_rows(label_path, lrows, 1, llinenos)[:, 0]
        if column.shape[0] != x.shape[0]:
            raise ParseError(
                f"snapshot {name!r} has {column.shape[0]} rows, coordinates have {x.shape[0]}",
                path=label_path,
            )
        snapshots.append(column)
    return SnapshotDatabase(x=x, snapshots=np.array(snapshots),
                            names=tuple(os.path.splitext(n)[0] for n in label_files))


def save_snapshot_csv(path, db: SnapshotDatabase) -> None:
    header = ",".join(
        [f"x{d + 1}" for d in range(db.x.shape[1])]
        + [f"y_{k + 1}" for k in range(db.num_snapshots)]
    )
    _atomic_write_table(path, header, np.column_stack([db.x, db.snapshots.T]))


def format_floats(values) -> list:
    return [FLOAT_FMT % v for v in np.asarray(values, dtype=float).ravel()]


def _atomic_write_table(path, header: str, table: np.ndarray) -> None:
    lines = [header]
    for row in table:
        lines.append(",".join(format_floats(row)))
    atomic_write_text(path, "\n".join(lines) + "\n")


def atomic_write_text(path, text: str) -> None:
    """Write via a temp file and rename, so readers never see partials."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
