"""Readers for IMS-style run-to-failure snapshot directories and CSV series.

An IMS snapshot file is ASCII, one sample per line, channels separated by
tabs or runs of whitespace, nominally 20480 rows (1 s at 20 kHz). The
recording time is encoded in the filename as ``yyyy.MM.dd.HH.mm.ss``.
Each snapshot is reduced to a single trend value (RMS by default) so a
whole run-to-failure directory becomes one SnapshotSeries.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import EmptyDatasetError, ParseError, ValidationError
from .series import SnapshotSeries, fmt_float

IMS_FILENAME_FORMAT = "%Y.%m.%d.%H.%M.%S"
IMS_EXPECTED_ROWS = 20480

AGGREGATION_METHODS = ("rms", "mean_abs", "peak")


@dataclass(frozen=True)
class SnapshotFileRef:
    """One snapshot file plus the epoch timestamp parsed from its name."""

    path: Path
    timestamp: float


@dataclass(frozen=True)
class SnapshotMatrix:
    """Raw samples of one snapshot: rows x channels, all finite."""

    samples: np.ndarray
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float64, copy=True)
        if samples.ndim != 2:
            raise ValidationError("snapshot samples must be 2-D")
        if not np.isfinite(samples).all():
            raise ValidationError("snapshot samples must be finite")
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    @property
    def rows(self) -> int:
        return int(self.samples.shape[0])

    @property
    def channels(self) -> int:
        return int(self.samples.shape[1])


@dataclass(frozen=True)
class ScanResult:
    """Ordered snapshot refs plus the names that were skipped."""

    refs: tuple[SnapshotFileRef, ...]
    skipped: tuple[str, ...]
    expected_channels: int

    def __len__(self) -> int:
        return len(self.refs)


def parse_ims_timestamp(name: str) -> float | None:
    """Epoch seconds (UTC) from a ``yyyy.MM.dd.HH.mm.ss`` filename, else None."""
    try:
        dt = datetime.strptime(name, IMS_FILENAME_FORMAT)
    except ValueError:
        return None
    return dt.replace(tzinfo=timezone.utc).timestamp()


def scan_ims_directory(directory, expected_channels: int) -> ScanResult:
    """List snapshot files in timestamp order.

    Non-matching filenames are reported in ``skipped``, not fatal. The
    result is independent of directory listing order.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise NotADirectoryError(f"not a readable directory: {directory}")
    refs = []
    skipped = []
    for entry in directory.iterdir():
        if not entry.is_file():
            skipped.append(entry.name)
            continue
        ts = parse_ims_timestamp(entry.name)
        if ts is None:
            skipped.append(entry.name)
        else:
            refs.append(SnapshotFileRef(entry, ts))
    if not refs:
        raise EmptyDatasetError(f"no parseable snapshot filenames in {directory}")
    refs.sort(key=lambda r: r.timestamp)
    for a, b in zip(refs, refs[1:]):
        if b.timestamp <= a.timestamp:
            raise ValidationError(
                f"duplicate snapshot timestamp: {a.path.name} vs {b.path.name}"
            )
    return ScanResult(tuple(refs), tuple(sorted(skipped)), expected_channels)


def parse_ims_file(content: str, expected_channels: int) -> SnapshotMatrix:
    """Parse one snapshot file body into a rows x channels matrix.

    Row counts other than 20480 are tolerated but attach a warning, since
    public copies of the dataset contain a few truncated files.
    """
    if expected_channels < 1:
        raise ValidationError("expected_channels must be >= 1")
    rows = []
    for lineno, line in enumerate(content.splitlines(), start=1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != expected_channels:
            raise ParseError(
                f"line {lineno}: expected {expected_channels} columns, got {len(parts)}"
            )
        rows.append((lineno, parts))
    if not rows:
        raise EmptyDatasetError("snapshot file contains no samples")
    try:
        samples = np.array([p for _, p in rows], dtype=np.float64)
    except ValueError:
        samples = None
    if samples is None:
        for lineno, parts in rows:
            for tok in parts:
                try:
                    float(tok)
                except ValueError:
                    raise ParseError(f"line {lineno}: non-numeric token {tok!r}") from None
        raise ParseError("snapshot file contains a non-numeric token")
    bad = ~np.isfinite(samples)
    if bad.any():
        lineno = rows[int(np.argwhere(bad)[0][0])][0]
        raise ParseError(f"line {lineno}: non-finite sample value")
    warnings = ()
    if samples.shape[0] != IMS_EXPECTED_ROWS:
        warnings = (
            f"expected {IMS_EXPECTED_ROWS} rows per snapshot, got {samples.shape[0]}",
        )
    return SnapshotMatrix(samples, warnings)


def serialize_snapshot_matrix(matrix: SnapshotMatrix) -> str:
    """Tab-separated text that parse_ims_file maps back to the same matrix."""
    lines = []
    for row in matrix.samples:
        lines.append("\t".join(fmt_float(v) for v in row))
    return "\n".join(lines) + "\n"


def aggregate_snapshot(matrix: SnapshotMatrix, channel: int, method: str = "rms") -> float:
    """Reduce one channel of a snapshot to a single trend value."""
    if matrix.rows == 0:
        raise ValueError("cannot aggregate an empty snapshot")
    if not 0 <= channel < matrix.channels:
        raise IndexError(
            f"channel {channel} out of range for {matrix.channels}-channel snapshot"
        )
    column = matrix.samples[:, channel]
    if method == "rms":
        return float(np.sqrt(np.mean(np.square(column))))
    if method == "mean_abs":
        return float(np.mean(np.abs(column)))
    if method == "peak":
        return float(np.max(np.abs(column)))
    raise ValueError(f"unknown aggregation method {method!r}; use one of {AGGREGATION_METHODS}")


def _is_missing(token: str) -> bool:
    return token.strip() == ""


def _parse_cell(token: str, row: int, what: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise ParseError(f"row {row}: non-numeric {what} cell {token.strip()!r}") from None


def load_csv_series(
    path,
    value_column: int,
    timestamp_column: int | None = None,
) -> SnapshotSeries:
    """Read a delimiter-separated series file into a SnapshotSeries.

    A single header line is auto-detected (its value cell fails numeric
    parsing). Empty value cells import as NaN so fill_missing can repair
    them. Without a timestamp column, indices 0,1,2,... are synthesized.
    """
    path = Path(path)
    raw_lines = path.read_text(encoding="utf-8").splitlines()
    lines = [(i + 1, ln) for i, ln in enumerate(raw_lines) if ln.strip() != ""]
    if not lines:
        raise EmptyDatasetError(f"no data rows in {path}")

    needed = value_column if timestamp_column is None else max(value_column, timestamp_column)

    first_row = lines[0][1].split(",")
    has_header = False
    if len(first_row) > needed:
        tok = first_row[value_column]
        if not _is_missing(tok):
            try:
                float(tok)
            except ValueError:
                has_header = True
    else:
        has_header = True
    if has_header:
        lines = lines[1:]
        if not lines:
            raise EmptyDatasetError(f"no data rows after header in {path}")

    values = []
    timestamps = []
    for rowno, line in lines:
        cells = line.split(",")
        if len(cells) <= needed:
            raise ParseError(
                f"row {rowno}: expected at least {needed + 1} columns, got {len(cells)}"
            )
        tok = cells[value_column]
        values.append(np.nan if _is_missing(tok) else _parse_cell(tok, rowno, "value"))
        if timestamp_column is not None:
            timestamps.append(_parse_cell(cells[timestamp_column], rowno, "timestamp"))

    if timestamp_column is None:
        ts = np.arange(len(values), dtype=np.float64)
    else:
        ts = np.asarray(timestamps, dtype=np.float64)
        if ts.size > 1 and not (np.diff(ts) > 0).all():
            bad = int(np.flatnonzero(np.diff(ts) <= 0)[0])
            raise ValidationError(
                f"timestamps not strictly increasing at data row {bad + 2}"
            )
    return SnapshotSeries(ts, values, source_label=path.name, channel=value_column)


def read_series_csv(path) -> SnapshotSeries:
    """Read the canonical ``timestamp,value`` export back in."""
    return load_csv_series(path, value_column=1, timestamp_column=0)


def default_thread_count() -> int:
    """Parallelism cap: PROGNOST_THREADS if set, else the hardware count."""
    env = os.environ.get("PROGNOST_THREADS")
    if env is not None:
        try:
            n = int(env)
        except ValueError:
            raise ValidationError(f"PROGNOST_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise ValidationError("PROGNOST_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


def load_ims_series(
    directory,
    expected_channels: int,
    channel: int,
    method: str = "rms",
    threads: int | None = None,
) -> tuple[SnapshotSeries, ScanResult]:
    """Scan, parse and aggregate a whole IMS directory into one series.

    Files are parsed in a thread pool but merged in timestamp order, so
    the result is identical to a sequential pass.
    """
    scan = scan_ims_directory(directory, expected_channels)
    if threads is None:
        threads = default_thread_count()

    def one(ref: SnapshotFileRef) -> float:
        matrix = parse_ims_file(ref.path.read_text(encoding="ascii"), expected_channels)
        return aggregate_snapshot(matrix, channel, method)

    if threads > 1 and len(scan.refs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(one, scan.refs))
    else:
        values = [one(ref) for ref in scan.refs]

    series = SnapshotSeries(
        np.array([r.timestamp for r in scan.refs]),
        np.array(values),
        source_label=Path(directory).name,
        channel=channel,
    )
    return series, scan
