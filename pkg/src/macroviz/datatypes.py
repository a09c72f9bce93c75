"""Datatype classification: nominal, ordinal, discrete, or continuous.

The default path is a pure heuristic over the attribute profile; this is
the least judgment-dependent step in the pipeline, so the LLM override is
opt-in. When the LLM path runs, any answer outside the four-value set falls
back to the heuristic value for that attribute, so classification is total
no matter what the provider returns.
"""

from __future__ import annotations

import json
from typing import Mapping, Optional, Sequence

from .dataset import AttributeProfile
from .gateway import LlmClient, StructuredCall

DATATYPES = ("nominal", "ordinal", "discrete", "continuous")

_MONTHS = {
    "january", "february", "march", "april", "may", "june", "july",
    "august", "september", "october", "november", "december",
}
_MONTH_ABBREVS = {
    "jan", "feb", "mar", "apr", "may", "jun",
    "jul", "aug", "sep", "oct", "nov", "dec",
}
_WEEKDAYS = {
    "monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday",
}
_WEEKDAY_ABBREVS = {"mon", "tue", "wed", "thu", "fri", "sat", "sun"}
_SIZES = {"xs", "s", "small", "m", "medium", "l", "large", "xl", "xxl"}
_LEVELS = {"low", "medium", "high"}
_QUARTERS = {"q1", "q2", "q3", "q4"}

_ORDERED_VOCABULARIES = (
    _MONTHS,
    _MONTH_ABBREVS,
    _WEEKDAYS,
    _WEEKDAY_ABBREVS,
    _SIZES,
    _LEVELS,
    _QUARTERS,
)


def _matches_ordered_vocabulary(profile: AttributeProfile) -> bool:
    if profile.count == 0:
        return False
    # the profile exposes only the five most frequent values; require those
    # to sit inside one vocabulary and the distinct count not to exceed it
    values = {str(value).strip().lower() for value, _ in profile.top5}
    return any(
        values <= vocab and profile.unique_count <= len(vocab)
        for vocab in _ORDERED_VOCABULARIES
    )


def classify_heuristic(
    profile: AttributeProfile,
    unique_ratio: float = 0.5,
    unique_floor: int = 20,
) -> str:
    """Rule-ordered heuristic; thresholds govern discrete-vs-continuous ints."""
    kind = profile.storage_kind
    if kind == "real":
        return "continuous"
    if kind == "integer":
        ratio = profile.unique_count / profile.count if profile.count else 0.0
        if ratio > unique_ratio and profile.unique_count > unique_floor:
            return "continuous"
        return "discrete"
    if kind == "date":
        return "ordinal"
    if _matches_ordered_vocabulary(profile):
        return "ordinal"
    return "nominal"


def classify_llm(
    client: LlmClient,
    profiles: Sequence[AttributeProfile],
    user_prompt: str,
    heuristic: Mapping[str, str],
) -> tuple[dict[str, str], Optional[StructuredCall]]:
    """Single no-chain-of-thought call; invalid entries fall back per attribute."""
    call = client.call(
        "datatype",
        {
            "user_prompt": user_prompt,
            "profiles": json.dumps([p.to_json_dict() for p in profiles], indent=1),
        },
    )
    result = dict(heuristic)
    if not call.ok:
        return result, call
    proposed = call.answer.answer["datatypes"]
    for name, value in proposed.items():
        if name in result and value in DATATYPES:
            result[name] = value
    return result, call


def classify_all(
    profiles: Sequence[AttributeProfile],
    user_prompt: str,
    client: Optional[LlmClient] = None,
    use_llm: bool = False,
    unique_ratio: float = 0.5,
    unique_floor: int = 20,
) -> tuple[dict[str, str], Optional[StructuredCall]]:
    """Heuristic map, optionally overlaid by the LLM path."""
    heuristic = {
        p.name: classify_heuristic(p, unique_ratio, unique_floor) for p in profiles
    }
    if use_llm and client is not None:
        return classify_llm(client, profiles, user_prompt, heuristic)
    return heuristic, None
