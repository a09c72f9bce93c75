"""SQL transformation step: load the dataset into an in-memory relational
engine as table ``csv``, let the LLM write a SELECT fulfilling the request,
validate by executing, and retry with fresh attempts.

Each retry is an independent call with the identical prompt, deliberately
not self-reflection, which tends to make trivial edits to a broken query
instead of rethinking it. After the retry budget is spent the step is
bypassed and the untouched input flows on. A successful result with exactly
one data row is flagged ``table``: single-point charts are useless, so the
caller renders a table instead.

The engine is sqlite with statistical aggregates (corr, regr_slope,
regr_intercept, stddev, var_pop, percentile_cont) registered to restore the
analytical surface the generated SQL expects. Sessions are read-only from
the query's perspective: non-SELECT statements are rejected up front and
the connection itself refuses writes.
"""

from __future__ import annotations

import math
import re
import sqlite3
from dataclasses import dataclass, field
from datetime import date
from typing import Optional, Sequence

from .dataset import AttributeProfile, CellValue, Dataset, storage_kind_of, _parse_date
from .errors import (
    EmptyResult,
    MacrovizError,
    NonSelectStatement,
    SanitizationCollision,
    SqlExecutionError,
    SqlParseError,
)
from .gateway import LlmClient, StructuredCall
from .knowledge import FunctionDoc, docs_to_prompt_text

_SQL_TYPE = {"text": "TEXT", "integer": "INTEGER", "real": "REAL", "date": "TEXT"}

_SUGGESTION_OPT_OUT = (
    "do not use sql suggestions",
    "don't use sql suggestions",
    "without sql suggestions",
    "no sql suggestions",
    "do not use analytical functions",
    "don't use analytical functions",
    "without analytical functions",
    "no analytical functions",
)


def suggestions_disabled_by_prompt(user_prompt: str) -> bool:
    """Honor the explicit per-prompt directive disabling RAG suggestions."""
    lowered = " ".join(user_prompt.lower().split())
    return any(phrase in lowered for phrase in _SUGGESTION_OPT_OUT)


def sanitize_identifier(name: str) -> str:
    ident = re.sub(r"[^0-9a-zA-Z]+", "_", name.strip()).strip("_").lower()
    if not ident:
        ident = "col"
    if ident[0].isdigit():
        ident = "c_" + ident
    return ident


# --- registered statistical aggregates --------------------------------------


def _as_float(value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"expected a number, got {value!r}")
    return float(value)


class _Bivariate:
    """Welford-style running first/second moments over (x, y) pairs."""

    def __init__(self) -> None:
        self.n = 0
        self.mean_x = 0.0
        self.mean_y = 0.0
        self.m2x = 0.0
        self.m2y = 0.0
        self.cxy = 0.0

    def add(self, x, y) -> None:
        if x is None or y is None:
            return
        fx, fy = _as_float(x), _as_float(y)
        self.n += 1
        dx = fx - self.mean_x
        dy = fy - self.mean_y
        self.mean_x += dx / self.n
        self.mean_y += dy / self.n
        self.m2x += dx * (fx - self.mean_x)
        self.m2y += dy * (fy - self.mean_y)
        self.cxy += dx * (fy - self.mean_y)


class CorrAgg:
    def __init__(self) -> None:
        self._acc = _Bivariate()

    def step(self, x, y) -> None:
        self._acc.add(x, y)

    def finalize(self) -> Optional[float]:
        acc = self._acc
        if acc.n < 2 or acc.m2x <= 0.0 or acc.m2y <= 0.0:
            return None
        return acc.cxy / math.sqrt(acc.m2x * acc.m2y)


class RegrSlopeAgg:
    """Least-squares slope; argument order (y, x) matches the usual SQL form."""

    def __init__(self) -> None:
        self._acc = _Bivariate()

    def step(self, y, x) -> None:
        self._acc.add(x, y)

    def finalize(self) -> Optional[float]:
        acc = self._acc
        if acc.n < 2 or acc.m2x <= 0.0:
            return None
        return acc.cxy / acc.m2x


class RegrInterceptAgg:
    def __init__(self) -> None:
        self._acc = _Bivariate()

    def step(self, y, x) -> None:
        self._acc.add(x, y)

    def finalize(self) -> Optional[float]:
        acc = self._acc
        if acc.n < 2 or acc.m2x <= 0.0:
            return None
        slope = acc.cxy / acc.m2x
        return acc.mean_y - slope * acc.mean_x


class _Univariate:
    def __init__(self) -> None:
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0

    def add(self, x) -> None:
        if x is None:
            return
        fx = _as_float(x)
        self.n += 1
        delta = fx - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (fx - self.mean)


class StddevAgg:
    """Sample standard deviation (n-1 denominator)."""

    def __init__(self) -> None:
        self._acc = _Univariate()

    def step(self, x) -> None:
        self._acc.add(x)

    def finalize(self) -> Optional[float]:
        if self._acc.n < 2:
            return None
        return math.sqrt(self._acc.m2 / (self._acc.n - 1))


class VarPopAgg:
    """Population variance (n denominator)."""

    def __init__(self) -> None:
        self._acc = _Univariate()

    def step(self, x) -> None:
        self._acc.add(x)

    def finalize(self) -> Optional[float]:
        if self._acc.n < 1:
            return None
        return self._acc.m2 / self._acc.n


class PercentileContAgg:
    """Continuous percentile via linear interpolation: percentile_cont(f, x)."""

    def __init__(self) -> None:
        self.fraction: Optional[float] = None
        self.values: list[float] = []

    def step(self, fraction, x) -> None:
        if fraction is not None:
            f = _as_float(fraction)
            if not 0.0 <= f <= 1.0:
                raise ValueError("percentile fraction must be in [0, 1]")
            self.fraction = f
        if x is not None:
            self.values.append(_as_float(x))

    def finalize(self) -> Optional[float]:
        if not self.values or self.fraction is None:
            return None
        ordered = sorted(self.values)
        h = (len(ordered) - 1) * self.fraction
        lo = math.floor(h)
        hi = math.ceil(h)
        if lo == hi:
            return ordered[lo]
        return ordered[lo] + (h - lo) * (ordered[hi] - ordered[lo])


_AGGREGATES = (
    ("corr", 2, CorrAgg),
    ("regr_slope", 2, RegrSlopeAgg),
    ("regr_intercept", 2, RegrInterceptAgg),
    ("stddev", 1, StddevAgg),
    ("var_pop", 1, VarPopAgg),
    ("percentile_cont", 2, PercentileContAgg),
)


# --- session ------------------------------------------------------------------


@dataclass
class SqlSession:
    """One in-memory database holding exactly the table ``csv``."""

    conn: sqlite3.Connection
    name_map: dict[str, str]  # original -> sanitized
    reverse_map: dict[str, str]  # sanitized -> original
    column_types: dict[str, str] = field(default_factory=dict)  # sanitized -> SQL type

    def close(self) -> None:
        self.conn.close()

    def __enter__(self) -> "SqlSession":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def schema_text(self) -> str:
        """Schema description for the SQL prompt, with original names noted."""
        lines = []
        for original, sanitized in self.name_map.items():
            kind = self.column_types.get(sanitized, "TEXT")
            note = f'  (from CSV column "{original}")' if original != sanitized else ""
            lines.append(f"- {sanitized} {kind}{note}")
        return "\n".join(lines)


def load_into_sql(dataset: Dataset) -> SqlSession:
    """Create the ``csv`` table mirroring the dataset, then lock it read-only."""
    name_map: dict[str, str] = {}
    reverse: dict[str, str] = {}
    for original in dataset.attributes:
        sanitized = sanitize_identifier(original)
        if sanitized in reverse:
            raise SanitizationCollision(
                f"{original!r} and {reverse[sanitized]!r} both sanitize to {sanitized!r}"
            )
        name_map[original] = sanitized
        reverse[sanitized] = original

    kinds = {
        name_map[name]: _SQL_TYPE[storage_kind_of(dataset.column(name))]
        for name in dataset.attributes
    }

    conn = sqlite3.connect(":memory:")
    for name, nargs, cls in _AGGREGATES:
        conn.create_aggregate(name, nargs, cls)

    columns_sql = ", ".join(
        f'"{name_map[name]}" {kinds[name_map[name]]}' for name in dataset.attributes
    )
    conn.execute(f"CREATE TABLE csv ({columns_sql})")
    placeholders = ", ".join("?" for _ in dataset.attributes)
    conn.executemany(
        f"INSERT INTO csv VALUES ({placeholders})",
        [tuple(_to_sql_value(cell) for cell in row) for row in dataset.rows],
    )
    conn.commit()
    conn.execute("PRAGMA query_only = ON")

    return SqlSession(
        conn=conn, name_map=name_map, reverse_map=reverse, column_types=kinds
    )


def _to_sql_value(cell: CellValue):
    if isinstance(cell, date):
        return cell.isoformat()
    return cell


# --- query validation -----------------------------------------------------


_VERBS = {"SELECT", "INSERT", "UPDATE", "DELETE", "REPLACE", "CREATE", "DROP", "ALTER", "VALUES"}

# recognized statement keywords that are not SELECT; anything else up front
# is treated as unparseable rather than as a forbidden statement kind
_NON_SELECT_KEYWORDS = {
    "INSERT", "UPDATE", "DELETE", "REPLACE", "CREATE", "DROP", "ALTER",
    "PRAGMA", "ATTACH", "DETACH", "VACUUM", "ANALYZE", "REINDEX",
    "BEGIN", "COMMIT", "ROLLBACK", "SAVEPOINT", "RELEASE", "EXPLAIN", "VALUES",
}


def _strip_comments(sql: str) -> str:
    out = []
    i = 0
    n = len(sql)
    while i < n:
        ch = sql[i]
        if ch == "'" or ch == '"':
            quote = ch
            out.append(ch)
            i += 1
            while i < n:
                out.append(sql[i])
                if sql[i] == quote:
                    i += 1
                    break
                i += 1
            continue
        if ch == "-" and sql[i : i + 2] == "--":
            while i < n and sql[i] != "\n":
                i += 1
            continue
        if ch == "/" and sql[i : i + 2] == "/*":
            i += 2
            while i < n and sql[i : i + 2] != "*/":
                i += 1
            i += 2
            continue
        out.append(ch)
        i += 1
    return "".join(out)


def _top_level_words(sql: str) -> list[str]:
    """Bare word tokens at parenthesis depth zero, uppercased."""
    words = []
    depth = 0
    i = 0
    n = len(sql)
    while i < n:
        ch = sql[i]
        if ch in "'\"":
            quote = ch
            i += 1
            while i < n and sql[i] != quote:
                i += 1
            i += 1
            continue
        if ch == "(":
            depth += 1
            i += 1
            continue
        if ch == ")":
            depth -= 1
            i += 1
            continue
        if depth == 0 and (ch.isalpha() or ch == "_"):
            j = i
            while j < n and (sql[j].isalnum() or sql[j] == "_"):
                j += 1
            words.append(sql[i:j].upper())
            i = j
            continue
        i += 1
    return words


def check_statement(sql: str) -> None:
    """Reject anything that is not a single SELECT (CTEs allowed)."""
    cleaned = _strip_comments(sql).strip()
    if cleaned.endswith(";"):
        cleaned = cleaned[:-1].rstrip()
    if not cleaned:
        raise SqlParseError("empty statement")
    if _has_interior_semicolon(cleaned):
        raise SqlParseError("multiple statements")
    words = _top_level_words(cleaned)
    if not words:
        raise SqlParseError("no statement keyword found")
    if words[0] == "SELECT":
        return
    if words[0] == "WITH":
        for word in words[1:]:
            if word in _VERBS:
                if word == "SELECT":
                    return
                raise NonSelectStatement(f"{word} is not allowed")
        raise SqlParseError("WITH clause without a SELECT body")
    if words[0] in _NON_SELECT_KEYWORDS:
        raise NonSelectStatement(f"{words[0]} is not allowed")
    raise SqlParseError(f"unrecognized statement keyword {words[0]!r}")


def _has_interior_semicolon(sql: str) -> bool:
    i = 0
    n = len(sql)
    while i < n:
        ch = sql[i]
        if ch in "'\"":
            quote = ch
            i += 1
            while i < n and sql[i] != quote:
                i += 1
            i += 1
            continue
        if ch == ";":
            return True
        i += 1
    return False


@dataclass(frozen=True)
class SqlQuery:
    text: str
    attempt_index: int
    reasoning: str = ""


def validate_and_execute(session: SqlSession, query: SqlQuery) -> Dataset:
    """Execute the query and materialize its result as a Dataset.

    Result column names matching the sanitized schema are mapped back to the
    original CSV names; LLM-derived names pass through verbatim.
    """
    check_statement(query.text)
    try:
        cursor = session.conn.execute(query.text)
        rows = cursor.fetchall()
    except sqlite3.ProgrammingError as exc:
        raise SqlParseError(str(exc)) from exc
    except sqlite3.OperationalError as exc:
        message = str(exc)
        if "syntax error" in message:
            raise SqlParseError(message) from exc
        if "readonly" in message or "read-only" in message:
            raise NonSelectStatement(message) from exc
        raise SqlExecutionError(message) from exc
    except sqlite3.Error as exc:
        raise SqlExecutionError(str(exc)) from exc

    if not rows:
        raise EmptyResult("query returned no rows")
    names = [session.reverse_map.get(d[0], d[0]) for d in cursor.description]
    try:
        return _materialize(names, rows)
    except MacrovizError as exc:
        raise SqlExecutionError(f"result not tabular: {exc}") from exc


def _materialize(names: list[str], rows: list[tuple]) -> Dataset:
    columns: list[list[CellValue]] = []
    for idx in range(len(names)):
        raw = [row[idx] for row in rows]
        columns.append(_coerce_column(raw))
    data_rows = tuple(
        tuple(columns[c][r] for c in range(len(names))) for r in range(len(rows))
    )
    return Dataset(attributes=tuple(names), rows=data_rows)


def _coerce_column(raw: list) -> list[CellValue]:
    present = [v for v in raw if v is not None]
    if present and all(isinstance(v, int) and not isinstance(v, bool) for v in present):
        return list(raw)
    if present and all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in present
    ):
        return [float(v) if v is not None else None for v in raw]
    if present and all(isinstance(v, str) for v in present):
        dates = [_parse_date(v) for v in present]
        if all(d is not None for d in dates):
            return [_parse_date(v) if v is not None else None for v in raw]
        return list(raw)
    return [str(v) if v is not None else None for v in raw]


# --- generation and the retry loop -----------------------------------------


def generate_sql(
    client: LlmClient,
    user_prompt: str,
    profiles: Sequence[AttributeProfile],
    retrieved_docs: Sequence[FunctionDoc],
    attempt_index: int,
    schema_text: str,
) -> tuple[Optional[SqlQuery], StructuredCall]:
    """One fresh generation attempt (no conversation carry-over)."""
    import json as _json

    call = client.call(
        "sql_transform",
        {
            "user_prompt": user_prompt,
            "schema": schema_text,
            "profiles": _json.dumps([p.to_json_dict() for p in profiles], indent=1),
            "function_docs": docs_to_prompt_text(retrieved_docs),
        },
    )
    if not call.ok:
        return None, call
    query = SqlQuery(
        text=str(call.answer.answer["sql"]).strip(),
        attempt_index=attempt_index,
        reasoning=call.answer.reasoning,
    )
    return query, call


@dataclass(frozen=True)
class SqlAttempt:
    attempt_index: int
    sql: Optional[str]
    error: Optional[str]
    reasoning: str = ""


@dataclass(frozen=True)
class TransformOutcome:
    kind: str  # transformed | table | bypassed
    dataset: Dataset
    query: Optional[SqlQuery]
    attempts: int
    attempt_log: tuple[SqlAttempt, ...] = ()
    suggestions_disabled: bool = False
    retrieved_names: tuple[str, ...] = ()


def transform(
    client: LlmClient,
    dataset: Dataset,
    user_prompt: str,
    profiles: Sequence[AttributeProfile],
    retry_limit: int,
    retrieved_docs: Sequence[FunctionDoc],
    suggestions_disabled: bool = False,
) -> TransformOutcome:
    """Generate-validate-retry loop around the SQL step.

    Failure is absorbed: after ``retry_limit`` invalid attempts the input
    dataset passes through untouched (kind=bypassed).
    """
    attempts: list[SqlAttempt] = []
    with load_into_sql(dataset) as session:
        schema = session.schema_text()
        for attempt_index in range(1, retry_limit + 1):
            query, call = generate_sql(
                client, user_prompt, profiles, retrieved_docs, attempt_index, schema
            )
            if query is None:
                attempts.append(
                    SqlAttempt(attempt_index, None, call.error or "provider failure")
                )
                continue
            try:
                result = validate_and_execute(session, query)
            except MacrovizError as exc:
                attempts.append(
                    SqlAttempt(
                        attempt_index,
                        query.text,
                        f"{type(exc).__name__}: {exc}",
                        query.reasoning,
                    )
                )
                continue
            attempts.append(
                SqlAttempt(attempt_index, query.text, None, query.reasoning)
            )
            kind = "table" if result.row_count == 1 else "transformed"
            return TransformOutcome(
                kind=kind,
                dataset=result,
                query=query,
                attempts=attempt_index,
                attempt_log=tuple(attempts),
                suggestions_disabled=suggestions_disabled,
                retrieved_names=tuple(d.name for d in retrieved_docs),
            )
    return TransformOutcome(
        kind="bypassed",
        dataset=dataset,
        query=None,
        attempts=retry_limit,
        attempt_log=tuple(attempts),
        suggestions_disabled=suggestions_disabled,
        retrieved_names=tuple(d.name for d in retrieved_docs),
    )
