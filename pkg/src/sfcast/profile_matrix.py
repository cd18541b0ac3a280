"""Year-stacked observation matrix: construction, masking, standardization.

Each series is cut into fixed-length periods ("years") and every period
becomes one column of a T x N matrix.  Missing values inside a series are
carried as NaN in the raw sequence and become masked cells; partial leading
or trailing periods are zero-padded with mask=False.
"""

from __future__ import annotations

import datetime as _dt
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateSeriesError,
    EmptyInputError,
    InvalidPeriodError,
    SeriesNotFoundError,
)


@dataclass(frozen=True)
class RawSeries:
    """A single raw series in natural units.

    NaN entries mark missing observations.  ``start_offset`` is the position
    of the first sample within its first period.
    """

    id: str
    values: np.ndarray
    start_offset: int = 0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 1 or vals.size < 1:
            raise EmptyInputError(f"series {self.id!r} must hold at least one value")
        if self.start_offset < 0:
            raise InvalidPeriodError(f"series {self.id!r}: negative start_offset")

    @property
    def n_observed(self) -> int:
        return int(np.isfinite(self.values).sum())


@dataclass(frozen=True)
class SeriesYearIndex:
    """Maps (series_id, year u) pairs to columns of the stacked matrix."""

    entries: tuple  # of (series_id, year_index, column)

    def __post_init__(self):
        cols = sorted(e[2] for e in self.entries)
        if cols != list(range(len(self.entries))):
            raise InvalidPeriodError("index columns must be 0..N-1 exactly once")

    @property
    def n_columns(self) -> int:
        return len(self.entries)

    @property
    def series_ids(self) -> list[str]:
        seen: dict[str, None] = {}
        for sid, _, _ in self.entries:
            seen.setdefault(sid, None)
        return list(seen)

    def columns_of(self, series_id: str) -> list[int]:
        cols = [c for sid, _, c in self.entries if sid == series_id]
        if not cols:
            raise SeriesNotFoundError(f"unknown series {series_id!r}")
        return cols

    def series_of_column(self, column: int) -> str:
        for sid, _, c in self.entries:
            if c == column:
                return sid
        raise SeriesNotFoundError(f"no column {column}")


@dataclass(frozen=True)
class StandardizationStats:
    mean: float
    std: float

    def __post_init__(self):
        if not self.std > 0:
            raise DegenerateSeriesError("std must be positive")

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std

    def invert(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) * self.std + self.mean


@dataclass(frozen=True)
class ProfileMatrix:
    """T x N stacked matrix with an observation mask."""

    data: np.ndarray
    mask: np.ndarray
    period: int
    index: SeriesYearIndex
    offsets: dict = field(default_factory=dict)  # series_id -> start_offset

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        mask = np.ascontiguousarray(self.mask, dtype=bool)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "mask", mask)
        if data.shape != mask.shape:
            raise InvalidPeriodError("data and mask shapes differ")
        if data.shape[0] != self.period:
            raise InvalidPeriodError("row count must equal the period")
        if data.shape[1] != self.index.n_columns:
            raise InvalidPeriodError("column count disagrees with the index")
        if not np.all(np.isfinite(data[mask])):
            raise InvalidPeriodError("observed cells must be finite")

    @property
    def n_observed(self) -> int:
        return int(self.mask.sum())

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def with_mask(self, mask: np.ndarray) -> "ProfileMatrix":
        """Copy with a replacement observation mask (data unchanged)."""
        data = np.where(mask, self.data, 0.0)
        return ProfileMatrix(data, mask, self.period, self.index, dict(self.offsets))


def reorganize(series: list[RawSeries], period: int) -> ProfileMatrix:
    """Stack each period of each series as its own column.

    Columns are ordered by input series order, then ascending year.  Cells
    beyond a series' real extent (leading offset pad, trailing remainder,
    NaN gaps) get value 0 and mask False.
    """
    if period < 2:
        raise InvalidPeriodError(f"period must be >= 2, got {period}")
    if not series:
        raise EmptyInputError("no series given")

    blocks = []
    masks = []
    entries = []
    offsets = {}
    col = 0
    for s in series:
        if s.start_offset >= period:
            raise InvalidPeriodError(
                f"series {s.id!r}: start_offset {s.start_offset} >= period {period}"
            )
        total = s.start_offset + len(s.values)
        n_years = math.ceil(total / period)
        flat = np.zeros(n_years * period)
        flat_mask = np.zeros(n_years * period, dtype=bool)
        observed = np.isfinite(s.values)
        flat[s.start_offset : total][observed] = s.values[observed]
        flat_mask[s.start_offset : total] = observed
        blocks.append(flat.reshape(n_years, period).T)
        masks.append(flat_mask.reshape(n_years, period).T)
        offsets[s.id] = s.start_offset
        for u in range(1, n_years + 1):
            entries.append((s.id, u, col))
            col += 1

    data = np.concatenate(blocks, axis=1)
    mask = np.concatenate(masks, axis=1)
    return ProfileMatrix(data, mask, period, SeriesYearIndex(tuple(entries)), offsets)


def flatten(pm: ProfileMatrix, series_id: str) -> np.ndarray:
    """Inverse of reorganize for one series: concatenated columns, pads removed.

    Cells that were masked inside the series' real extent come back as NaN.
    """
    cols = pm.index.columns_of(series_id)
    offset = pm.offsets.get(series_id, 0)
    block = pm.data[:, cols].T.ravel().copy()
    block_mask = pm.mask[:, cols].T.ravel()
    block[~block_mask] = np.nan
    # trailing pad = run of masked cells after the last observation
    observed_idx = np.nonzero(block_mask)[0]
    if observed_idx.size == 0:
        raise SeriesNotFoundError(f"series {series_id!r} has no observed values")
    end = observed_idx[-1] + 1
    return block[offset:end]


def standardize(series: RawSeries) -> tuple[RawSeries, StandardizationStats]:
    """Zero-mean, unit-sample-std rescaling over the observed raw values."""
    observed = series.values[np.isfinite(series.values)]
    if observed.size < 2:
        raise DegenerateSeriesError(f"series {series.id!r}: need >= 2 observed values")
    mean = float(observed.mean())
    std = float(observed.std(ddof=1))
    if std == 0.0:
        raise DegenerateSeriesError(f"series {series.id!r} has zero variance")
    stats = StandardizationStats(mean, std)
    return RawSeries(series.id, stats.apply(series.values), series.start_offset), stats


def align_to_weekday(
    series: RawSeries, target_weekday: int, calendar_start: _dt.date
) -> RawSeries:
    """Re-cut a daily series so every 365-day period starts on target_weekday.

    The first window is anchored at the last occurrence of the target
    weekday (Monday=0) on or before ``calendar_start`` (the date of
    values[0]); each following window starts at the first target weekday on
    or after the previous window's end, so the up-to-six drifted days per
    year are dropped.  Positions the series does not cover come back as NaN.
    """
    n = len(series.values)
    start = calendar_start
    end = start + _dt.timedelta(days=n - 1)

    anchor = start - _dt.timedelta(days=(start.weekday() - target_weekday) % 7)
    out = []
    while anchor <= end:
        chunk = np.full(365, np.nan)
        lo = max(0, (start - anchor).days)
        hi = min(365, (end - anchor).days + 1)
        for p in range(lo, hi):
            chunk[p] = series.values[(anchor - start).days + p]
        out.append(chunk)
        nxt = anchor + _dt.timedelta(days=365)
        anchor = nxt + _dt.timedelta(days=(target_weekday - nxt.weekday()) % 7)
    if not out:
        raise EmptyInputError(f"series {series.id!r}: no aligned periods")
    return RawSeries(series.id, np.concatenate(out), 0)


def read_long_format(path, offsets_path=None) -> list[RawSeries]:
    """Read ``series_id,t,value`` rows (t is a 0-based per-series sample index).

    Gaps in t become NaN.  An optional sidecar file with ``series_id,start_offset``
    rows supplies per-series offsets.
    """
    per_series: dict[str, dict[int, float]] = {}
    order: list[str] = []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header[:3] != ["series_id", "t", "value"]:
            raise EmptyInputError(f"{path}: expected header series_id,t,value")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            sid, t, value = line.split(",")
            if sid not in per_series:
                per_series[sid] = {}
                order.append(sid)
            per_series[sid][int(t)] = float(value)
    if not per_series:
        raise EmptyInputError(f"{path}: no rows")

    offsets: dict[str, int] = {}
    if offsets_path is not None:
        with open(offsets_path) as fh:
            fh.readline()  # header
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                sid, off = line.split(",")
                offsets[sid] = int(off)

    out = []
    for sid in order:
        samples = per_series[sid]
        length = max(samples) + 1
        values = np.full(length, np.nan)
        for t, v in samples.items():
            values[t] = v
        out.append(RawSeries(sid, values, offsets.get(sid, 0)))
    return out


def write_long_format(path, pm: ProfileMatrix) -> None:
    """Dump every series back to the long delimited format (debug aid)."""
    with open(path, "w") as fh:
        fh.write("series_id,t,value\n")
        for sid in pm.index.series_ids:
            vals = flatten(pm, sid)
            for t, v in enumerate(vals):
                if np.isfinite(v):
                    fh.write(f"{sid},{t},{float(v)!r}\n")
