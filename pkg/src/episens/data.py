"""Ingestion of the Italian national daily-report CSV.

The upstream file is comma-separated with an ISO-8601 timestamp column
``data`` and cumulative/current count columns; extra columns are ignored.
Only calendar dates are kept (the fixed 18:00 collection time is dropped).
"""

from __future__ import annotations

import csv
import datetime as dt
import io
from dataclasses import dataclass

import numpy as np

from .errors import InconsistentSeries, MalformedRow, MissingColumn, OutOfRange

REQUIRED_COLUMNS = ("data", "totale_positivi", "dimessi_guariti", "deceduti", "totale_casi")
NORMALIZED_HEADER = ("date", "quarantined", "recovered", "deceased", "total")


@dataclass
class ObservedSeries:
    """Daily observations: currently-positive counts plus cumulative totals."""

    dates: tuple[dt.date, ...]
    quarantined: np.ndarray
    recovered: np.ndarray
    deceased: np.ndarray
    total_confirmed: np.ndarray

    def __len__(self) -> int:
        return len(self.dates)

    def validate(self) -> "ObservedSeries":
        n = len(self.dates)
        for name in ("quarantined", "recovered", "deceased", "total_confirmed"):
            if len(getattr(self, name)) != n:
                raise InconsistentSeries(f"{name} length != number of dates")
        if n == 0:
            raise InconsistentSeries("series is empty")
        for k in range(1, n):
            if (self.dates[k] - self.dates[k - 1]).days != 1:
                raise InconsistentSeries(
                    f"row {k}: dates must be consecutive days "
                    f"({self.dates[k - 1]} -> {self.dates[k]})"
                )
        for name in ("recovered", "deceased", "total_confirmed"):
            col = getattr(self, name)
            drops = np.nonzero(np.diff(col) < 0)[0]
            if drops.size:
                k = int(drops[0]) + 1
                raise InconsistentSeries(f"row {k}: {name} decreases")
        mismatch = np.nonzero(
            self.quarantined + self.recovered + self.deceased != self.total_confirmed
        )[0]
        if mismatch.size:
            k = int(mismatch[0])
            raise InconsistentSeries(
                f"row {k}: quarantined+recovered+deceased != total_confirmed"
            )
        return self

    def window(self) -> tuple[dt.date, dt.date]:
        return self.dates[0], self.dates[-1]


def _parse_date(text: str, row: int) -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip()[:10])
    except ValueError as exc:
        raise MalformedRow(f"row {row}: bad date {text!r}") from exc


def _parse_count(text: str, column: str, row: int) -> int:
    raw = text.strip()
    try:
        value = int(raw)
    except ValueError as exc:
        raise MalformedRow(f"row {row}: column {column!r} is not an integer: {raw!r}") from exc
    if value < 0:
        raise MalformedRow(f"row {row}: column {column!r} is negative: {value}")
    return value


def parse_national_csv(data: bytes | str) -> ObservedSeries:
    """Parse the national-trend CSV dialect into an ObservedSeries.

    Raises MissingColumn, MalformedRow, or InconsistentSeries.
    """
    text = data.decode("utf-8-sig") if isinstance(data, bytes) else data
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    for column in REQUIRED_COLUMNS:
        if column not in header:
            raise MissingColumn(f"required column {column!r} missing from header")

    dates: list[dt.date] = []
    cols: dict[str, list[int]] = {c: [] for c in REQUIRED_COLUMNS[1:]}
    for idx, record in enumerate(reader):
        dates.append(_parse_date(record["data"] or "", idx))
        for column in cols:
            cols[column].append(_parse_count(record[column] or "", column, idx))

    return ObservedSeries(
        dates=tuple(dates),
        quarantined=np.asarray(cols["totale_positivi"], dtype=np.int64),
        recovered=np.asarray(cols["dimessi_guariti"], dtype=np.int64),
        deceased=np.asarray(cols["deceduti"], dtype=np.int64),
        total_confirmed=np.asarray(cols["totale_casi"], dtype=np.int64),
    ).validate()


def slice_window(series: ObservedSeries, start: dt.date, end: dt.date) -> ObservedSeries:
    """Inclusive date-window slice; raises OutOfRange for bad bounds."""
    if start > end:
        raise OutOfRange(f"window start {start} is after end {end}")
    first, last = series.window()
    if start < first or end > last:
        raise OutOfRange(
            f"window {start}..{end} outside available data {first}..{last}"
        )
    i0 = (start - first).days
    i1 = (end - first).days + 1
    return ObservedSeries(
        dates=series.dates[i0:i1],
        quarantined=series.quarantined[i0:i1].copy(),
        recovered=series.recovered[i0:i1].copy(),
        deceased=series.deceased[i0:i1].copy(),
        total_confirmed=series.total_confirmed[i0:i1].copy(),
    ).validate()


def to_normalized_csv(series: ObservedSeries) -> str:
    """Serialize to the normalized 5-column layout."""
    lines = [",".join(NORMALIZED_HEADER)]
    for k, day in enumerate(series.dates):
        lines.append(
            f"{day.isoformat()},{series.quarantined[k]},{series.recovered[k]},"
            f"{series.deceased[k]},{series.total_confirmed[k]}"
        )
    return "\n".join(lines) + "\n"


def from_normalized_csv(data: bytes | str) -> ObservedSeries:
    """Parse the normalized 5-column layout written by :func:`to_normalized_csv`."""
    text = data.decode("utf-8-sig") if isinstance(data, bytes) else data
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    for column in NORMALIZED_HEADER:
        if column not in header:
            raise MissingColumn(f"required column {column!r} missing from header")
    dates: list[dt.date] = []
    cols: dict[str, list[int]] = {c: [] for c in NORMALIZED_HEADER[1:]}
    for idx, record in enumerate(reader):
        dates.append(_parse_date(record["date"] or "", idx))
        for column in cols:
            cols[column].append(_parse_count(record[column] or "", column, idx))
    return ObservedSeries(
        dates=tuple(dates),
        quarantined=np.asarray(cols["quarantined"], dtype=np.int64),
        recovered=np.asarray(cols["recovered"], dtype=np.int64),
        deceased=np.asarray(cols["deceased"], dtype=np.int64),
        total_confirmed=np.asarray(cols["total"], dtype=np.int64),
    ).validate()
