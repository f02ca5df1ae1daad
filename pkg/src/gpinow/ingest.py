"""Event-file parsing, monthly count panels and GPI ground truth.

GDELT 1.0 event exports are headerless tab-separated files.  Only three
columns matter here: ``MonthYear``, ``EventBaseCode`` and
``ActionGeo_CountryCode``.  Rows are grouped by (country, month, base code)
and counted, which is the offline equivalent of a ``GROUP BY`` over the
events table.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, TextIO

import numpy as np

from .errors import ConfigError, DataValidationError, NotFoundError
from .months import Month, month_range

logger = logging.getLogger(__name__)

GPI_MIN = 1.0
GPI_MAX = 5.0

PANEL_HEADER = ("country", "month", "event_base_code", "count")


@dataclass(frozen=True)
class ColumnMap:
    """Zero-based positions of the columns we read, plus the layout width."""

    month_year: int = 2
    event_base_code: int = 27
    country: int = 51
    width: int = 58

    def __post_init__(self):
        for name in ("month_year", "event_base_code", "country"):
            idx = getattr(self, name)
            if not 0 <= idx < self.width:
                raise ConfigError(
                    f"column {name}={idx} outside declared width {self.width}"
                )

    @property
    def min_fields(self) -> int:
        return max(self.month_year, self.event_base_code, self.country) + 1

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, int], base: "ColumnMap | None" = None) -> "ColumnMap":
        """Override a layout with GDELT column names or field names."""
        aliases = {
            "MonthYear": "month_year",
            "EventBaseCode": "event_base_code",
            "ActionGeo_CountryCode": "country",
        }
        base = base or GDELT_58
        kwargs = {
            "month_year": base.month_year,
            "event_base_code": base.event_base_code,
            "country": base.country,
            "width": base.width,
        }
        for key, value in mapping.items():
            name = aliases.get(key, key)
            if name not in kwargs:
                raise ConfigError(f"unknown column map key: {key}")
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(f"column index for {key} must be an integer")
            kwargs[name] = value
        return cls(**kwargs)


# Historical files before April 2013 lack the trailing SOURCEURL column.
GDELT_57 = ColumnMap(width=57)
GDELT_58 = ColumnMap(width=58)
LAYOUTS = {"57": GDELT_57, "58": GDELT_58}


@dataclass(frozen=True)
class EventRecord:
    month: Month
    event_base_code: str
    country: str

    def __post_init__(self):
        if not _valid_code(self.event_base_code):
            raise DataValidationError(f"bad event base code: {self.event_base_code!r}")
        if not _valid_country(self.country):
            raise DataValidationError(f"bad country code: {self.country!r}")


def _valid_code(code: str) -> bool:
    return 2 <= len(code) <= 4 and code.isascii() and code.isdigit()


def _valid_country(code: str) -> bool:
    return len(code) == 2 and code.isascii() and code.isalpha() and code.isupper()


def _parse_month_year(text: str) -> Month | None:
    if len(text) != 6 or not text.isascii() or not text.isdigit():
        return None
    mm = int(text[4:])
    if not 1 <= mm <= 12:
        return None
    return Month(int(text[:4]), mm)


class EventScan:
    """Single-pass iterator over a GDELT event stream.

    Malformed lines are skipped and tallied in ``malformed``; ``lines``
    counts every line seen.  Memory use does not depend on stream length.
    """

    def __init__(self, stream: TextIO, column_map: ColumnMap = GDELT_58):
        self.stream = stream
        self.column_map = column_map
        self.lines = 0
        self.malformed = 0

    def __iter__(self) -> Iterator[EventRecord]:
        cm = self.column_map
        need = cm.min_fields
        for raw in self.stream:
            line = raw.rstrip("\r\n")
            self.lines += 1
            fields = line.split("\t")
            if len(fields) < need:
                self.malformed += 1
                continue
            month = _parse_month_year(fields[cm.month_year].strip())
            code = fields[cm.event_base_code].strip()
            country = fields[cm.country].strip()
            if month is None or not _valid_code(code) or not _valid_country(country):
                self.malformed += 1
                continue
            yield EventRecord(month, code, country)


def parse_gdelt_events(
    stream: TextIO, column_map: ColumnMap = GDELT_58
) -> tuple[list[EventRecord], int]:
    """Parse a whole stream, returning the records and the malformed-line count."""
    scan = EventScan(stream, column_map)
    records = list(scan)
    return records, scan.malformed


@dataclass(frozen=True)
class PanelCube:
    """Event counts keyed by (country, month, event base code).

    Absent keys mean zero events; stored counts are always >= 1.
    """

    counts: Mapping[tuple[str, Month, str], int] = field(default_factory=dict)

    def __post_init__(self):
        for key, n in self.counts.items():
            if n < 1:
                raise DataValidationError(f"non-positive count at {key}: {n}")
        by_country: dict[str, dict[tuple[Month, str], int]] = {}
        for (country, month, code), n in self.counts.items():
            by_country.setdefault(country, {})[(month, code)] = n
        object.__setattr__(self, "_by_country", by_country)

    def __len__(self) -> int:
        return len(self.counts)

    def total(self) -> int:
        return sum(self.counts.values())

    def countries(self) -> list[str]:
        return sorted(self._by_country)

    def codes(self) -> list[str]:
        return sorted({code for (_, _, code) in self.counts})

    def country_counts(self, country: str) -> dict[tuple[Month, str], int]:
        try:
            return self._by_country[country]
        except KeyError:
            raise NotFoundError(f"country {country} not present in panel") from None

    def month_span(self, country: str) -> tuple[Month, Month]:
        months = [m for (m, _) in self.country_counts(country)]
        return min(months), max(months)

    def merge(self, other: "PanelCube") -> "PanelCube":
        """Sum two cubes key-wise; associative and commutative."""
        merged = Counter(self.counts)
        merged.update(other.counts)
        return PanelCube(dict(merged))

    def sorted_items(self) -> list[tuple[tuple[str, Month, str], int]]:
        return sorted(self.counts.items())


def aggregate_counts(records: Iterable[EventRecord]) -> PanelCube:
    counts = Counter((r.country, r.month, r.event_base_code) for r in records)
    return PanelCube(dict(counts))


def write_panel_csv(cube: PanelCube, out: TextIO) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(PANEL_HEADER)
    for (country, month, code), n in cube.sorted_items():
        writer.writerow((country, str(month), code, n))


def read_panel_csv(stream: TextIO) -> PanelCube:
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None:
        return PanelCube({})
    if tuple(h.strip() for h in header) != PANEL_HEADER:
        raise DataValidationError(f"unexpected panel header: {header}")
    counts: dict[tuple[str, Month, str], int] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            country, month, code, n = row
            key = (country, Month.parse(month), code)
            count = int(n)
        except ValueError as exc:
            raise DataValidationError(f"panel row {lineno}: {exc}") from None
        if key in counts:
            raise DataValidationError(f"panel row {lineno}: duplicate key {row[:3]}")
        counts[key] = count
    return PanelCube(counts)


@dataclass(frozen=True)
class AnnualGpi:
    entries: Mapping[tuple[str, int], float]

    def __post_init__(self):
        for key, score in self.entries.items():
            if not GPI_MIN <= score <= GPI_MAX:
                raise DataValidationError(f"GPI score out of [1, 5] at {key}: {score}")

    def countries(self) -> list[str]:
        return sorted({c for (c, _) in self.entries})

    def years(self, country: str) -> list[int]:
        return sorted(y for (c, y) in self.entries if c == country)


def load_gpi_annual(stream: TextIO) -> AnnualGpi:
    """Read a ``country,year,score`` CSV."""
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["country", "year", "score"]:
        raise DataValidationError(f"GPI file must start with header country,year,score; got {header}")
    entries: dict[tuple[str, int], float] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 3:
            raise DataValidationError(f"GPI row {lineno}: expected 3 fields, got {len(row)}")
        country = row[0].strip()
        try:
            year = int(row[1])
            score = float(row[2])
        except ValueError:
            raise DataValidationError(f"GPI row {lineno}: cannot parse {row}") from None
        if not math.isfinite(score) or not GPI_MIN <= score <= GPI_MAX:
            raise DataValidationError(
                f"GPI row {lineno} ({country},{year}): score {score} outside [1, 5]"
            )
        if (country, year) in entries:
            raise DataValidationError(f"GPI row {lineno}: duplicate entry ({country},{year})")
        entries[(country, year)] = score
    return AnnualGpi(entries)


@dataclass(frozen=True)
class MonthlyGpiSeries:
    country: str
    start_month: Month
    values: tuple[float, ...]

    @property
    def end_month(self) -> Month:
        return self.start_month + (len(self.values) - 1)

    @property
    def months(self) -> list[Month]:
        return [self.start_month + i for i in range(len(self.values))]

    def value_at(self, month: Month) -> float | None:
        i = month - self.start_month
        if 0 <= i < len(self.values):
            return self.values[i]
        return None


def upsample_gpi(annual: AnnualGpi, country: str) -> MonthlyGpiSeries:
    """Anchor each annual score at January and interpolate linearly in between.

    No values are produced after the last January anchor.
    """
    years = annual.years(country)
    if not years:
        raise NotFoundError(f"no GPI entries for country {country}")
    for a, b in zip(years, years[1:]):
        if b != a + 1:
            raise DataValidationError(f"GPI years for {country} have a gap between {a} and {b}")
    anchors = [annual.entries[(country, y)] for y in years]
    values = []
    for lo, hi in zip(anchors, anchors[1:]):
        for m in range(12):
            values.append(lo + (hi - lo) * m / 12.0)
    values.append(anchors[-1])
    return MonthlyGpiSeries(country, Month(years[0], 1), tuple(values))


@dataclass(frozen=True)
class FeatureMatrix:
    """Dense month x event-code count matrix for one country."""

    months: tuple[Month, ...]
    codes: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (len(self.months), len(self.codes)):
            raise DataValidationError(
                f"matrix shape {self.values.shape} does not match "
                f"{len(self.months)} months x {len(self.codes)} codes"
            )
        for a, b in zip(self.months, self.months[1:]):
            if b - a != 1:
                raise DataValidationError(f"months not contiguous at {a} -> {b}")
        if list(self.codes) != sorted(set(self.codes)):
            raise DataValidationError("codes must be strictly ascending")
        self.values.setflags(write=False)

    def rows(self, start: int, stop: int) -> "FeatureMatrix":
        return FeatureMatrix(self.months[start:stop], self.codes, self.values[start:stop])

    def select(self, codes: Iterable[str]) -> np.ndarray:
        """Columns for ``codes`` in the given order; unknown codes are zero-filled."""
        index = {c: j for j, c in enumerate(self.codes)}
        codes = list(codes)
        out = np.zeros((len(self.months), len(codes)), dtype=self.values.dtype)
        for k, c in enumerate(codes):
            j = index.get(c)
            if j is not None:
                out[:, k] = self.values[:, j]
        return out


def build_design_matrix(
    cube: PanelCube, country: str, month_range_: tuple[Month, Month]
) -> FeatureMatrix:
    start, end = month_range_
    if end < start:
        raise DataValidationError(f"empty month range {start}..{end}")
    cells = cube.country_counts(country)
    months = month_range(start, end)
    in_range = {(m, c): n for (m, c), n in cells.items() if start <= m <= end}
    codes = sorted({c for (_, c) in in_range})
    col = {c: j for j, c in enumerate(codes)}
    values = np.zeros((len(months), len(codes)), dtype=np.int64)
    for (m, c), n in in_range.items():
        values[m - start, col[c]] = n
    return FeatureMatrix(tuple(months), tuple(codes), values)


def panel_to_text(cube: PanelCube) -> str:
    buf = io.StringIO()
    write_panel_csv(cube, buf)
    return buf.getvalue()
