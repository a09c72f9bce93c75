"""Attribute selection with role prompting, verified answers, and bounded
self-reflection.

Runs twice per pipeline: before the SQL step to shrink the prompt context
(stage ``pre_transform``) and after it to pick the two-to-three attributes
worth charting (stage ``charting``). The verifier only accepts subsets of
the real attribute names; a bad answer is fed back to the model with the
verifier's complaint for up to ``reflection_limit`` extra turns, after
which the step falls back to the full attribute set rather than failing
the run.

The charting stage additionally enforces a hard cap of four attributes
(the largest template arity) and re-appends an identifier column (text,
all-distinct) the model dropped, since labels carry the human-readable
meaning of a chart.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

from .dataset import AttributeProfile
from .gateway import LlmClient, StructuredCall

PRE_TRANSFORM = "pre_transform"
CHARTING = "charting"

CHARTING_HARD_CAP = 4

_STAGE_DIRECTIVES = {
    PRE_TRANSFORM: (
        "Keep every attribute that could be needed to compute the answer, and "
        "drop the clearly irrelevant ones."
    ),
    CHARTING: (
        "Favor two to three important attributes, and always keep attributes "
        "critical to human interpretation such as unique identifiers or names."
    ),
}


@dataclass(frozen=True)
class RoleContext:
    role_text: str
    fell_back: bool = False


@dataclass(frozen=True)
class AttributeSelection:
    selected: tuple[str, ...]
    stage: str
    reasoning: str
    attempts: int
    fell_back: bool


def derive_role(client: LlmClient, attribute_names: Sequence[str]) -> RoleContext:
    """One LLM call producing a dataset-domain persona; never fails."""
    call = client.call("role", {"attribute_names": ", ".join(attribute_names)})
    if call.ok:
        role = str(call.answer.answer["role"]).strip()
        if role:
            return RoleContext(role_text=role)
    return RoleContext(role_text="You are a data analyst.", fell_back=True)


def _identifier_attributes(profiles: Sequence[AttributeProfile]) -> list[str]:
    return [
        p.name
        for p in profiles
        if p.storage_kind == "text" and p.count > 0 and p.unique_count == p.count
    ]


def filter_attributes(
    client: LlmClient,
    profiles: Sequence[AttributeProfile],
    user_prompt: str,
    role: RoleContext,
    stage: str,
    reflection_limit: int = 3,
) -> AttributeSelection:
    """Verified subset selection with self-reflection and full-set fallback."""
    if stage not in (PRE_TRANSFORM, CHARTING):
        raise ValueError(f"unknown stage {stage!r}")
    names = [p.name for p in profiles]
    base_bindings = {
        "role": role.role_text,
        "user_prompt": user_prompt,
        "profiles": json.dumps([p.to_json_dict() for p in profiles], indent=1),
        "directives": _STAGE_DIRECTIVES[stage],
    }

    reflection = ""
    reasoning = ""
    attempts = 0
    for _ in range(1 + reflection_limit):
        attempts += 1
        bindings = dict(base_bindings)
        bindings["directives"] = base_bindings["directives"] + reflection
        call = client.call("attr_filter", bindings)
        problem, selected = _verify(call, names)
        if problem is None:
            reasoning = call.answer.reasoning if call.ok else ""
            return _finish(selected, stage, profiles, reasoning, attempts)
        prior = _prior_answer_text(call)
        reflection = (
            f"\n\nYour previous answer was: {prior}\n"
            f"It failed verification: {problem}\n"
            "Answer again using only attribute names from the summaries, "
            "spelled exactly as given."
        )
    fallback = _apply_charting_rules(list(names), stage, profiles)
    return AttributeSelection(
        selected=tuple(fallback),
        stage=stage,
        reasoning="",
        attempts=attempts,
        fell_back=True,
    )


def _verify(
    call: StructuredCall, names: Sequence[str]
) -> tuple[Optional[str], list[str]]:
    """Returns (problem, selection); problem None means the answer passed."""
    if not call.ok:
        return call.error or "provider failure", []
    proposed = [str(a) for a in call.answer.answer["attributes"]]
    if not proposed:
        return "the attribute list is empty", []
    unknown = [a for a in proposed if a not in names]
    if unknown:
        return f"these are not attribute names: {unknown}", []
    deduped = list(dict.fromkeys(proposed))
    return None, deduped


def _prior_answer_text(call: StructuredCall) -> str:
    if call.ok:
        return json.dumps(call.answer.answer)
    if call.response is not None:
        return call.response.text[:500]
    return "(no response)"


def _finish(
    selected: list[str],
    stage: str,
    profiles: Sequence[AttributeProfile],
    reasoning: str,
    attempts: int,
) -> AttributeSelection:
    final = _apply_charting_rules(selected, stage, profiles)
    return AttributeSelection(
        selected=tuple(final),
        stage=stage,
        reasoning=reasoning,
        attempts=attempts,
        fell_back=False,
    )


def _apply_charting_rules(
    selected: list[str], stage: str, profiles: Sequence[AttributeProfile]
) -> list[str]:
    """Charting stage: preserve an identifier column, then cap at four.

    Relevance order is the answer order, so the post-trim drops the model's
    lowest-ranked extras first; a kept identifier survives the trim.
    """
    if stage != CHARTING:
        return list(selected)
    identifiers = _identifier_attributes(profiles)
    final = list(selected)
    if identifiers and not any(a in identifiers for a in final):
        final.append(identifiers[0])
    if len(final) > CHARTING_HARD_CAP:
        ident = next((a for a in final if a in identifiers), None)
        budget = CHARTING_HARD_CAP - (1 if ident is not None else 0)
        keep = [a for a in final if a != ident][:budget]
        if ident is not None:
            keep = [a for a in final if a in keep or a == ident]
        final = keep
    return final
