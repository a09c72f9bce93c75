"""CSV ingestion and per-attribute profiling.

A parsed CSV becomes an immutable :class:`Dataset` of typed cells (text,
integer, real, date, or null). Each column is then compressed into an
:class:`AttributeProfile` (count, unique values, extremes, mean, standard
deviation, variance, and the top five values), which is what downstream
prompts see instead of raw rows, keeping LLM context bounded.

Conventions fixed here so fixtures stay deterministic:

* statistics are population statistics (variance = sum((x-mean)^2)/n);
* nulls are excluded from every statistic, including count;
* top-5 ties break by first appearance in the column;
* columns whose cells are all null are typed text;
* empty text is represented as null (RFC 4180 cannot round-trip the
  difference between an empty quoted string and an empty field).
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass
from datetime import date
from typing import Iterable, Optional, Union

from .errors import BadCsv, DuplicateHeader, EmptyInput, RaggedRow, UnknownAttribute

CellValue = Union[str, int, float, date, None]

_INT_RE = re.compile(r"^[+-]?\d+$")
_REAL_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")
_ISO_DATE_RE = re.compile(r"^(\d{4})-(\d{2})-(\d{2})$")
# ambiguous day/month resolves month-first: "12/1/17" is December 1st
_MDY_DATE_RE = re.compile(r"^(\d{1,2})/(\d{1,2})/(\d{2}|\d{4})$")


def _parse_date(text: str) -> Optional[date]:
    m = _ISO_DATE_RE.match(text)
    if m:
        year, month, day = int(m.group(1)), int(m.group(2)), int(m.group(3))
    else:
        m = _MDY_DATE_RE.match(text)
        if not m:
            return None
        month, day = int(m.group(1)), int(m.group(2))
        year = int(m.group(3))
        if year < 100:
            year += 2000
    try:
        return date(year, month, day)
    except ValueError:
        return None


@dataclass(frozen=True)
class Dataset:
    """Immutable tabular data: ordered attribute names plus typed rows."""

    attributes: tuple[str, ...]
    rows: tuple[tuple[CellValue, ...], ...] = ()

    def __post_init__(self) -> None:
        if not self.attributes:
            raise EmptyInput("dataset has no attributes")
        trimmed = tuple(name.strip() for name in self.attributes)
        if any(not name for name in trimmed):
            raise DuplicateHeader("attribute names must be nonempty after trimming")
        if len(set(trimmed)) != len(trimmed):
            raise DuplicateHeader(f"duplicate attribute names in {trimmed!r}")
        object.__setattr__(self, "attributes", trimmed)
        for i, row in enumerate(self.rows):
            if len(row) != len(trimmed):
                raise RaggedRow(
                    f"row {i} has {len(row)} cells, expected {len(trimmed)}"
                )

    def column(self, name: str) -> list[CellValue]:
        try:
            idx = self.attributes.index(name)
        except ValueError:
            raise UnknownAttribute(name) from None
        return [row[idx] for row in self.rows]

    def select(self, names: Iterable[str]) -> "Dataset":
        """Project onto the given attributes, keeping the given order."""
        names = list(names)
        indices = []
        for name in names:
            if name not in self.attributes:
                raise UnknownAttribute(name)
            indices.append(self.attributes.index(name))
        return Dataset(
            attributes=tuple(names),
            rows=tuple(tuple(row[i] for i in indices) for row in self.rows),
        )

    @property
    def row_count(self) -> int:
        return len(self.rows)


@dataclass(frozen=True)
class AttributeProfile:
    """Summary statistics for one attribute, computed over non-null cells."""

    name: str
    storage_kind: str  # text | integer | real | date
    count: int
    unique_count: int
    min: CellValue = None
    max: CellValue = None
    mean: Optional[float] = None
    stddev: Optional[float] = None
    variance: Optional[float] = None
    top5: tuple[tuple[CellValue, int], ...] = ()

    def to_json_dict(self) -> dict:
        """JSON shape embedded in prompts and traces."""
        out: dict = {
            "name": self.name,
            "storage_kind": self.storage_kind,
            "count": self.count,
            "unique_count": self.unique_count,
        }
        if self.count > 0:
            out["min"] = _cell_to_json(self.min)
            out["max"] = _cell_to_json(self.max)
        if self.mean is not None:
            out["mean"] = self.mean
            out["stddev"] = self.stddev
            out["variance"] = self.variance
        out["top5"] = [[_cell_to_json(v), n] for v, n in self.top5]
        return out


def _cell_to_json(value: CellValue):
    if isinstance(value, date):
        return value.isoformat()
    return value


def _cell_to_text(value: CellValue) -> str:
    if value is None:
        return ""
    if isinstance(value, date):
        return value.isoformat()
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_csv(data: bytes) -> Dataset:
    """Parse raw CSV bytes into a typed :class:`Dataset`.

    The first record is the header. Column types are inferred in fixed
    precedence: integer if every non-null cell parses as an integer, else
    real, else date (ISO-8601 or month-first M/D/YY[YY]), else text. Empty
    cells become null. Inference looks at the full column, so it is
    insensitive to row order.
    """
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise BadCsv(f"input is not UTF-8: {exc}") from exc
    try:
        reader = csv.reader(io.StringIO(text, newline=""))
        records = list(reader)
    except csv.Error as exc:
        raise BadCsv(f"malformed CSV: {exc}") from exc
    if not records:
        raise EmptyInput("CSV input has no header record")
    header = [name.strip() for name in records[0]]
    if not header or all(not name for name in header):
        raise EmptyInput("CSV header is empty")
    if any(not name for name in header):
        raise DuplicateHeader("CSV header contains an empty name")
    if len(set(header)) != len(header):
        raise DuplicateHeader(f"CSV header contains duplicates: {header!r}")

    raw_rows = records[1:]
    for i, row in enumerate(raw_rows):
        if len(row) != len(header):
            raise RaggedRow(f"row {i + 1} has {len(row)} cells, expected {len(header)}")

    columns: list[list[CellValue]] = []
    for col_idx in range(len(header)):
        raw = [row[col_idx] for row in raw_rows]
        columns.append(_infer_column(raw))

    rows = tuple(
        tuple(columns[c][r] for c in range(len(header)))
        for r in range(len(raw_rows))
    )
    return Dataset(attributes=tuple(header), rows=rows)


def _infer_column(raw: list[str]) -> list[CellValue]:
    present = [cell.strip() for cell in raw if cell.strip() != ""]
    if present and all(_INT_RE.match(cell) for cell in present):
        return [int(c.strip()) if c.strip() != "" else None for c in raw]
    if present and all(_REAL_RE.match(cell) for cell in present):
        return [float(c.strip()) if c.strip() != "" else None for c in raw]
    if present and all(_parse_date(cell) is not None for cell in present):
        return [_parse_date(c.strip()) if c.strip() != "" else None for c in raw]
    return [c if c.strip() != "" else None for c in raw]


def storage_kind_of(cells: Iterable[CellValue]) -> str:
    """Infer a column's storage kind from its non-null cell types.

    Mixed int/float promotes to real; any other mixture degrades to text.
    All-null columns are text.
    """
    kinds = set()
    for cell in cells:
        if cell is None:
            continue
        if isinstance(cell, bool):  # bool is an int subclass; treat as text
            kinds.add("text")
        elif isinstance(cell, int):
            kinds.add("integer")
        elif isinstance(cell, float):
            kinds.add("real")
        elif isinstance(cell, date):
            kinds.add("date")
        else:
            kinds.add("text")
    if not kinds:
        return "text"
    if kinds == {"integer"}:
        return "integer"
    if kinds <= {"integer", "real"}:
        return "real"
    if kinds == {"date"}:
        return "date"
    return "text"


def profile_attribute(dataset: Dataset, name: str) -> AttributeProfile:
    """Profile one attribute; numeric statistics only for numeric columns."""
    cells = dataset.column(name)  # raises UnknownAttribute
    kind = storage_kind_of(cells)
    present = [c for c in cells if c is not None]
    count = len(present)

    # frequency table preserving first-appearance order for tie-breaks
    freq: dict = {}
    order: list = []
    for cell in present:
        key = cell if kind != "text" else str(cell)
        if key not in freq:
            freq[key] = 0
            order.append(key)
        freq[key] += 1
    ranked = sorted(order, key=lambda k: -freq[k])  # stable: ties keep first-appearance order
    top5 = tuple((k, freq[k]) for k in ranked[:5])

    if count == 0:
        return AttributeProfile(
            name=name, storage_kind=kind, count=0, unique_count=0
        )

    if kind in ("integer", "real"):
        lo = min(present)
        hi = max(present)
        mean, variance = _welford(present)
        stddev = math.sqrt(variance)
        return AttributeProfile(
            name=name,
            storage_kind=kind,
            count=count,
            unique_count=len(freq),
            min=lo,
            max=hi,
            mean=mean,
            stddev=stddev,
            variance=variance,
            top5=top5,
        )

    if kind == "date":
        lo = min(present)
        hi = max(present)
    else:
        as_text = [str(c) for c in present]
        lo = min(as_text)
        hi = max(as_text)
    return AttributeProfile(
        name=name,
        storage_kind=kind,
        count=count,
        unique_count=len(freq),
        min=lo,
        max=hi,
        top5=top5,
    )


def _welford(values: list) -> tuple[float, float]:
    """Single-pass mean and population variance (Welford's update)."""
    mean = 0.0
    m2 = 0.0
    n = 0
    for x in values:
        n += 1
        delta = x - mean
        mean += delta / n
        m2 += delta * (x - mean)
    return mean, (m2 / n if n else 0.0)


def profile_dataset(dataset: Dataset) -> list[AttributeProfile]:
    """One profile per attribute, in attribute order."""
    return [profile_attribute(dataset, name) for name in dataset.attributes]


def dataset_to_csv(dataset: Dataset) -> bytes:
    """Serialize to RFC-4180-style CSV. Nulls become empty fields."""
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(dataset.attributes)
    for row in dataset.rows:
        writer.writerow([_cell_to_text(cell) for cell in row])
    return buf.getvalue().encode("utf-8")


def profiles_to_json(profiles: Iterable[AttributeProfile]) -> list[dict]:
    return [p.to_json_dict() for p in profiles]
