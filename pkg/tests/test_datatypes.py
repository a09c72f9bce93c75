"""Datatype classifier tests."""

import json

from hypothesis import given, settings
from hypothesis import strategies as st

from macroviz.dataset import Dataset, parse_csv, profile_attribute, profile_dataset
from macroviz.datatypes import DATATYPES, classify_all, classify_heuristic


def profile_of(cells):
    d = Dataset(attributes=("v",), rows=tuple((c,) for c in cells))
    return profile_attribute(d, "v")


class TestHeuristic:
    def test_door_count_discrete(self):
        assert classify_heuristic(profile_of([2, 4, 2, 4, 2])) == "discrete"

    def test_real_prices_continuous(self):
        assert classify_heuristic(profile_of([9.99, 12.5, 3.25])) == "continuous"

    def test_high_cardinality_integers_continuous(self):
        assert classify_heuristic(profile_of(list(range(100)))) == "continuous"

    def test_low_ratio_integers_discrete(self):
        assert classify_heuristic(profile_of([i % 30 for i in range(300)])) == "discrete"

    def test_dates_ordinal(self):
        d = parse_csv(b"when\n2017-01-02\n2017-05-06\n")
        assert classify_heuristic(profile_attribute(d, "when")) == "ordinal"

    def test_months_ordinal(self):
        months = ["January", "February", "March", "December", "July"]
        assert classify_heuristic(profile_of(months * 3)) == "ordinal"

    def test_size_ladder_ordinal(self):
        assert classify_heuristic(profile_of(["small", "medium", "large", "small"])) == "ordinal"

    def test_superstore_category_nominal(self):
        cats = ["Furniture", "Office Supplies", "Technology"] * 4
        assert classify_heuristic(profile_of(cats)) == "nominal"

    def test_empty_column_nominal_text(self):
        assert classify_heuristic(profile_of([None, None])) == "nominal"

    def test_thresholds_configurable(self):
        cells = list(range(10))  # ratio 1.0, unique 10
        assert classify_heuristic(profile_of(cells)) == "discrete"
        assert classify_heuristic(profile_of(cells), unique_floor=5) == "continuous"


class TestLlmPath:
    def test_override_accepted(self, make_client):
        client, _ = make_client(json.dumps({"datatypes": {"month": "ordinal"}}))
        d = parse_csv(b"month\n1\n2\n3\n")
        profiles = profile_dataset(d)
        result, call = classify_all(profiles, "per month", client=client, use_llm=True)
        assert result == {"month": "ordinal"}
        assert call is not None and call.ok

    def test_invalid_value_falls_back_per_attribute(self, make_client):
        client, _ = make_client(
            json.dumps({"datatypes": {"price": "purple", "name": "nominal"}})
        )
        d = parse_csv(b"name,price\na,1.5\nb,2.5\n")
        result, _ = classify_all(profile_dataset(d), "q", client=client, use_llm=True)
        assert result["price"] == "continuous"  # heuristic value kept
        assert result["name"] == "nominal"

    def test_provider_failure_full_heuristic(self, make_client):
        client, _ = make_client()  # empty queue -> ReplayMiss on every call
        d = parse_csv(b"name,price\na,1.5\nb,2.5\n")
        result, call = classify_all(profile_dataset(d), "q", client=client, use_llm=True)
        assert result == {"name": "nominal", "price": "continuous"}
        assert call is not None and not call.ok

    def test_unknown_attribute_in_answer_ignored(self, make_client):
        client, _ = make_client(json.dumps({"datatypes": {"ghost": "nominal"}}))
        d = parse_csv(b"price\n1.5\n")
        result, _ = classify_all(profile_dataset(d), "q", client=client, use_llm=True)
        assert result == {"price": "continuous"}


_cells = st.lists(
    st.one_of(
        st.none(),
        st.integers(min_value=-5000, max_value=5000),
        st.floats(min_value=-1e5, max_value=1e5, allow_nan=False),
        st.text(alphabet="abcXYZ ", min_size=1, max_size=8).filter(lambda s: s.strip()),
    ),
    max_size=40,
)


@given(_cells)
@settings(max_examples=80, deadline=None)
def test_heuristic_total_and_in_range(cells):
    assert classify_heuristic(profile_of(cells)) in DATATYPES


@given(_cells, st.randoms(use_true_random=False))
@settings(max_examples=40, deadline=None)
def test_heuristic_row_order_insensitive(cells, rng):
    shuffled = list(cells)
    rng.shuffle(shuffled)
    assert classify_heuristic(profile_of(cells)) == classify_heuristic(profile_of(shuffled))
