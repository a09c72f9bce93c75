"""SQL transform tests: loading, registered aggregates, validation, retries."""

import json
import math
import random
import statistics
from datetime import date

import pytest

from macroviz.dataset import Dataset, parse_csv, profile_dataset
from macroviz.errors import (
    EmptyResult,
    NonSelectStatement,
    SanitizationCollision,
    SqlExecutionError,
    SqlParseError,
)
from macroviz.sqlrun import (
    SqlQuery,
    check_statement,
    load_into_sql,
    sanitize_identifier,
    suggestions_disabled_by_prompt,
    transform,
    validate_and_execute,
)


def pearson(xs, ys):
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    cov = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    vx = sum((x - mx) ** 2 for x in xs)
    vy = sum((y - my) ** 2 for y in ys)
    return cov / math.sqrt(vx * vy)


def least_squares(xs, ys):
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    cov = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    vx = sum((x - mx) ** 2 for x in xs)
    slope = cov / vx
    return slope, my - slope * mx


def percentile_oracle(values, fraction):
    ordered = sorted(values)
    h = (len(ordered) - 1) * fraction
    lo, hi = math.floor(h), math.ceil(h)
    if lo == hi:
        return ordered[lo]
    return ordered[lo] + (h - lo) * (ordered[hi] - ordered[lo])


def run_sql(dataset, sql):
    with load_into_sql(dataset) as session:
        return validate_and_execute(session, SqlQuery(text=sql, attempt_index=1))


@pytest.fixture
def cars():
    rows = [
        ("vw rabbit", 90, "hatchback", 9980.0),
        ("porsche panamera", 207, "hardtop", 32528.0),
        ("porsche cayenne", 207, "convertible", 37028.0),
        ("buick century", 110, "sedan", 21485.0),
        ("jaguar xk", 176, "convertible", 35550.0),
        ("toyota starlet", 58, "hatchback", 6338.0),
        ("audi fox", 102, "sedan", 17450.0),
        ("bmw m3", 182, "convertible", 30760.0),
    ]
    return Dataset(attributes=("carname", "horsepower", "carbody", "price"), rows=tuple(rows))


class TestSanitize:
    def test_spaces_to_underscores(self):
        assert sanitize_identifier("days to ship") == "days_to_ship"

    def test_case_folded_and_specials(self):
        assert sanitize_identifier("Sales Forecast ($)") == "sales_forecast"

    def test_leading_digit_prefixed(self):
        assert sanitize_identifier("3d area") == "c_3d_area"

    def test_collision_raises(self):
        d = Dataset(attributes=("a b", "a_b"), rows=())
        with pytest.raises(SanitizationCollision):
            load_into_sql(d)


class TestLoadAndExecute:
    def test_mapping_recorded_and_desanitized(self, superstore_bytes):
        d = parse_csv(superstore_bytes)
        with load_into_sql(d) as session:
            assert session.name_map["days to ship"] == "days_to_ship"
            result = validate_and_execute(
                session, SqlQuery(text="SELECT days_to_ship FROM csv LIMIT 3", attempt_index=1)
            )
        assert result.attributes == ("days to ship",)

    def test_zero_row_dataset_queries_legal(self):
        d = Dataset(attributes=("x",), rows=())
        with load_into_sql(d) as session:
            with pytest.raises(EmptyResult):
                validate_and_execute(session, SqlQuery(text="SELECT x FROM csv", attempt_index=1))

    def test_single_value_select(self):
        d = Dataset(attributes=("x",), rows=((1,),))
        result = run_sql(d, "SELECT 1 AS x")
        assert result.row_count == 1 and result.rows[0] == (1,)

    def test_dates_normalized_iso_and_comparable(self):
        d = parse_csv(b"when,v\n12/1/17,1\n12/5/17,2\n11/30/17,3\n")
        result = run_sql(
            d, 'SELECT "when", v FROM csv WHERE "when" >= \'2017-12-01\' ORDER BY "when"'
        )
        assert result.column("when") == [date(2017, 12, 1), date(2017, 12, 5)]

    def test_derived_names_kept_verbatim(self, cars):
        result = run_sql(cars, "SELECT carname, price / horsepower AS value_score FROM csv")
        assert result.attributes == ("carname", "value_score")

    def test_parse_error(self, cars):
        with load_into_sql(cars) as session:
            with pytest.raises(SqlParseError):
                validate_and_execute(session, SqlQuery(text="SELCT * FRM csv", attempt_index=1))

    def test_drop_is_non_select(self, cars):
        with load_into_sql(cars) as session:
            with pytest.raises(NonSelectStatement):
                validate_and_execute(session, SqlQuery(text="DROP TABLE csv", attempt_index=1))

    def test_multiple_statements_rejected(self, cars):
        with load_into_sql(cars) as session:
            with pytest.raises(SqlParseError):
                validate_and_execute(
                    session, SqlQuery(text="SELECT 1; SELECT 2", attempt_index=1)
                )

    def test_unknown_column_is_execution_error(self, cars):
        with load_into_sql(cars) as session:
            with pytest.raises(SqlExecutionError):
                validate_and_execute(session, SqlQuery(text="SELECT nope FROM csv", attempt_index=1))

    def test_engine_never_mutates_source(self, cars):
        with load_into_sql(cars) as session:
            for evil in (
                "DELETE FROM csv",
                "INSERT INTO csv VALUES ('x', 1, 'y', 2.0)",
                "UPDATE csv SET price = 0",
            ):
                with pytest.raises(NonSelectStatement):
                    validate_and_execute(session, SqlQuery(text=evil, attempt_index=1))
            before_after = validate_and_execute(
                session, SqlQuery(text="SELECT count(*) AS n FROM csv", attempt_index=1)
            )
            assert before_after.rows[0] == (8,)

    def test_batman_style_threshold_query(self, cars):
        sql = (
            "SELECT carname, horsepower, carbody, price FROM csv "
            "WHERE (horsepower >= (SELECT MAX(horsepower) * 0.75 FROM csv)) "
            "AND (carbody IN ('convertible', 'hardtop')) "
            "AND (price >= (SELECT MAX(price) * 0.75 FROM csv)) "
            "ORDER BY horsepower DESC, price DESC;"
        )
        result = run_sql(cars, sql)
        hp_cut = max(r[1] for r in cars.rows) * 0.75
        price_cut = max(r[3] for r in cars.rows) * 0.75
        expected = sorted(
            [
                r
                for r in cars.rows
                if r[1] >= hp_cut and r[2] in ("convertible", "hardtop") and r[3] >= price_cut
            ],
            key=lambda r: (-r[1], -r[3]),
        )
        assert list(result.rows) == expected


class TestStatementCheck:
    def test_with_cte_select_allowed(self):
        check_statement("WITH t AS (SELECT 1 AS x) SELECT * FROM t")

    def test_with_cte_delete_rejected(self):
        with pytest.raises(NonSelectStatement):
            check_statement("WITH t AS (SELECT 1) DELETE FROM csv")

    def test_comments_stripped(self):
        check_statement("-- a comment\nSELECT 1 /* inline */")

    def test_trailing_semicolon_ok(self):
        check_statement("SELECT 1;")

    def test_semicolon_inside_string_ok(self):
        check_statement("SELECT 'a;b' AS x")

    def test_empty_rejected(self):
        with pytest.raises(SqlParseError):
            check_statement("   -- nothing\n")

    def test_pragma_rejected(self):
        with pytest.raises(NonSelectStatement):
            check_statement("PRAGMA query_only = OFF")


class TestAggregates:
    def test_corr_matches_pearson_on_fixture(self, superstore_bytes):
        d = parse_csv(superstore_bytes)
        result = run_sql(d, "SELECT corr(sales, profit) AS r FROM csv")
        oracle = pearson(d.column("sales"), d.column("profit"))
        assert result.rows[0][0] == pytest.approx(oracle, rel=1e-9)

    def test_random_tables_match_closed_forms(self):
        rng = random.Random(715)
        for _ in range(5):
            xs = [rng.uniform(-1000, 1000) for _ in range(100)]
            ys = [3.5 * x + rng.uniform(-200, 200) for x in xs]
            d = Dataset(attributes=("x", "y"), rows=tuple(zip(xs, ys)))
            result = run_sql(
                d,
                "SELECT corr(x, y) AS r, regr_slope(y, x) AS m, "
                "regr_intercept(y, x) AS b, stddev(x) AS s, var_pop(x) AS v, "
                "percentile_cont(0.5, x) AS p50 FROM csv",
            )
            r, m, b, s, v, p50 = result.rows[0]
            slope, intercept = least_squares(xs, ys)
            assert r == pytest.approx(pearson(xs, ys), rel=1e-9)
            assert m == pytest.approx(slope, rel=1e-9)
            assert b == pytest.approx(intercept, rel=1e-9)
            assert s == pytest.approx(statistics.stdev(xs), rel=1e-9)
            assert v == pytest.approx(statistics.pvariance(xs), rel=1e-9)
            assert p50 == pytest.approx(percentile_oracle(xs, 0.5), rel=1e-9)

    def test_percentile_fraction_validated(self, cars):
        with load_into_sql(cars) as session:
            with pytest.raises(SqlExecutionError):
                validate_and_execute(
                    session,
                    SqlQuery(text="SELECT percentile_cont(1.5, price) FROM csv", attempt_index=1),
                )

    def test_nulls_skipped_in_pairs(self):
        d = Dataset(attributes=("x", "y"), rows=((1.0, 2.0), (None, 9.0), (2.0, 4.0), (3.0, None), (3.0, 6.0)))
        result = run_sql(d, "SELECT corr(x, y) AS r FROM csv")
        assert result.rows[0][0] == pytest.approx(1.0, rel=1e-9)


def _sql_answer(sql, reasoning="thinking about the tables"):
    return f"{reasoning}\n{json.dumps({'sql': sql})}"


class TestTransformLoop:
    def test_four_invalid_bypasses(self, make_client, cars):
        client, _ = make_client(_sql_answer("SELCT nope"))
        outcome = transform(
            client, cars, "anything", profile_dataset(cars), retry_limit=4, retrieved_docs=[]
        )
        assert outcome.kind == "bypassed"
        assert outcome.attempts == 4
        assert outcome.dataset == cars
        assert len(outcome.attempt_log) == 4
        assert all(a.error for a in outcome.attempt_log)

    def test_three_invalid_then_valid(self, make_client, cars):
        client, provider = make_client(
            _sql_answer("SELECT broken FROM nowhere"),
            "no json here at all",
            _sql_answer("DROP TABLE csv"),
            _sql_answer("SELECT carname, price FROM csv ORDER BY price"),
        )
        outcome = transform(
            client, cars, "cheapest cars", profile_dataset(cars), retry_limit=4, retrieved_docs=[]
        )
        assert outcome.kind == "transformed"
        assert outcome.attempts == 4
        assert outcome.dataset.attributes == ("carname", "price")
        prices = outcome.dataset.column("price")
        assert prices == sorted(prices)
        assert len(provider.requests) == 4

    def test_single_row_returns_table_kind(self, make_client, cars):
        client, _ = make_client(_sql_answer("SELECT avg(price) AS avg_price FROM csv"))
        outcome = transform(
            client, cars, "average price", profile_dataset(cars), retry_limit=4, retrieved_docs=[]
        )
        assert outcome.kind == "table"
        assert outcome.dataset.row_count == 1

    def test_fresh_attempts_use_identical_prompt(self, make_client, cars):
        client, provider = make_client(_sql_answer("SELCT"))
        transform(client, cars, "x", profile_dataset(cars), retry_limit=3, retrieved_docs=[])
        rendered = {r.rendered for r in provider.requests}
        assert len(rendered) == 1  # no conversation carry-over between retries

    def test_outcome_is_reproducible(self, make_client, cars):
        for _ in range(2):
            client, _ = make_client(_sql_answer("SELECT carname FROM csv"))
            outcome = transform(
                client, cars, "names", profile_dataset(cars), retry_limit=4, retrieved_docs=[]
            )
            assert outcome.kind == "transformed"
            assert outcome.dataset.column("carname") == [r[0] for r in cars.rows]


class TestSuggestionDirective:
    @pytest.mark.parametrize(
        "prompt",
        [
            "Show me the distribution of profit and days to ship, do not use analytical functions or sql suggestions",
            "Show me the distribution between sales, sales forcast, and profit, do not use sql suggestions",
        ],
    )
    def test_explicit_directives_disable(self, prompt):
        assert suggestions_disabled_by_prompt(prompt)

    def test_plain_prompt_keeps_suggestions(self):
        assert not suggestions_disabled_by_prompt("show me sales and profits")
