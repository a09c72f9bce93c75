"""Machine-readable chart taxonomy: templates, feasibility, recommendation,
and encoding.

Feasibility is constraint satisfaction over a tiny search space: a template
admits an attribute set iff some injective assignment of the attributes
onto its slots covers every required slot with compatible datatypes. With
at most four attributes the exhaustive permutation scan is the whole
solver, and the first valid assignment (slots in declared order) is the
canonical witness used by the deterministic encoding fallback.

Recommendation prefers, in order: an explicit chart named by the user (when
feasible), the LLM's choice validated against the feasible set, then a
deterministic priority pick within the detected intent category. Every path
ends in a valid spec, so recommendation is total for nonempty feasible
sets regardless of provider behavior.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from itertools import permutations
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .errors import NoFeasibleChart
from .gateway import LlmClient

TAXONOMY_CATEGORIES = ("comparison", "distribution", "composition", "relationship")

_INTENT_KEYWORDS = (
    ("comparison", ("comparison", "compare", "comparing")),
    ("distribution", ("distribution", "distributed")),
    ("composition", ("composition", "share", "percent", "hierarchy")),
    ("relationship", ("relationship", "correlation", "relation")),
)


@dataclass(frozen=True)
class EncodingSlot:
    slot_id: str
    allowed: frozenset[str]
    required: bool


@dataclass(frozen=True)
class ChartTemplate:
    id: str
    display_name: str
    taxonomy_category: str
    slots: tuple[EncodingSlot, ...]
    min_attrs: int
    max_attrs: int
    priority: int
    cardinality_hints: Mapping[str, int]
    renders_as: str
    second_method: bool = False
    percent_variant: Optional[bool] = None
    abela_branch: str = ""

    def required_slots(self) -> list[EncodingSlot]:
        return [s for s in self.slots if s.required]


class ChartCatalog:
    def __init__(
        self,
        templates: Sequence[ChartTemplate],
        global_order: Sequence[str],
        raw_doc: Optional[dict] = None,
    ):
        self.templates = list(templates)
        self.by_id = {t.id: t for t in self.templates}
        self.global_order = list(global_order)
        self._global_rank = {tid: i for i, tid in enumerate(self.global_order)}
        self.raw_doc = raw_doc if raw_doc is not None else self._build_doc()

    @classmethod
    def load(cls, path: Path) -> "ChartCatalog":
        doc = json.loads(path.read_text(encoding="utf-8"))
        templates = []
        for raw in doc["templates"]:
            slots = tuple(
                EncodingSlot(
                    slot_id=s["slot_id"],
                    allowed=frozenset(s["allowed"]),
                    required=s["required"],
                )
                for s in raw["slots"]
            )
            templates.append(
                ChartTemplate(
                    id=raw["id"],
                    display_name=raw["display_name"],
                    taxonomy_category=raw["taxonomy_category"],
                    slots=slots,
                    min_attrs=raw["min_attrs"],
                    max_attrs=raw["max_attrs"],
                    priority=raw["priority"],
                    cardinality_hints=dict(raw.get("cardinality_hints", {})),
                    renders_as=raw.get("renders_as", raw["id"]),
                    second_method=raw.get("second_method", False),
                    percent_variant=raw.get("percent_variant"),
                    abela_branch=raw.get("abela_branch", ""),
                )
            )
        return cls(
            templates, doc.get("global_order", [t.id for t in templates]), raw_doc=doc
        )

    @classmethod
    def load_default(cls) -> "ChartCatalog":
        return cls.load(Path(__file__).parent / "data" / "catalog.json")

    def global_rank(self, template_id: str) -> int:
        return self._global_rank.get(template_id, len(self.global_order))

    def _build_doc(self) -> dict:
        return {
            "templates": [
                {
                    "id": t.id,
                    "display_name": t.display_name,
                    "taxonomy_category": t.taxonomy_category,
                    "abela_branch": t.abela_branch,
                    "renders_as": t.renders_as,
                    "second_method": t.second_method,
                    "min_attrs": t.min_attrs,
                    "max_attrs": t.max_attrs,
                    "cardinality_hints": dict(t.cardinality_hints),
                    "slots": [
                        {
                            "slot_id": s.slot_id,
                            "allowed": sorted(s.allowed),
                            "required": s.required,
                        }
                        for s in t.slots
                    ],
                }
                for t in self.templates
            ]
        }


_default_catalog: Optional[ChartCatalog] = None


def default_catalog() -> ChartCatalog:
    global _default_catalog
    if _default_catalog is None:
        _default_catalog = ChartCatalog.load_default()
    return _default_catalog


@dataclass(frozen=True)
class ChartSpec:
    """A concrete, render-ready slot-to-attribute assignment."""

    template_id: str
    assignments: Mapping[str, str]
    options: Mapping[str, object] = field(default_factory=dict)
    reasoning: str = ""

    def to_json_dict(self) -> dict:
        return {
            "template_id": self.template_id,
            "assignments": dict(self.assignments),
            "options": dict(self.options),
            "reasoning": self.reasoning,
        }


def validate_spec(
    spec: ChartSpec,
    catalog: ChartCatalog,
    datatypes: Mapping[str, str],
) -> list[str]:
    """All slot-invariant violations; empty means the spec is sound."""
    problems = []
    template = catalog.by_id.get(spec.template_id)
    if template is None:
        return [f"unknown template {spec.template_id!r}"]
    slot_by_id = {s.slot_id: s for s in template.slots}
    seen_attrs: set[str] = set()
    for slot_id, attr in spec.assignments.items():
        slot = slot_by_id.get(slot_id)
        if slot is None:
            problems.append(f"template has no slot {slot_id!r}")
            continue
        if attr not in datatypes:
            problems.append(f"attribute {attr!r} not in dataset")
            continue
        if datatypes[attr] not in slot.allowed:
            problems.append(
                f"attribute {attr!r} ({datatypes[attr]}) not allowed in slot {slot_id!r}"
            )
        if attr in seen_attrs:
            problems.append(f"attribute {attr!r} assigned twice")
        seen_attrs.add(attr)
    for slot in template.required_slots():
        if slot.slot_id not in spec.assignments:
            problems.append(f"required slot {slot.slot_id!r} unassigned")
    return problems


@dataclass(frozen=True)
class FeasibleChart:
    template_id: str
    witness: Mapping[str, str]  # canonical slot -> attribute assignment


@dataclass(frozen=True)
class FeasibleSet:
    feasible: tuple[FeasibleChart, ...]
    recommended: Optional[ChartSpec] = None

    def ids(self) -> list[str]:
        return [f.template_id for f in self.feasible]

    def get(self, template_id: str) -> Optional[FeasibleChart]:
        for entry in self.feasible:
            if entry.template_id == template_id:
                return entry
        return None


def _witness(template: ChartTemplate, attrs: Sequence[tuple[str, str]]) -> Optional[dict[str, str]]:
    """First valid injective attribute->slot assignment, or None.

    Enumeration order is lexicographic over slot indices with slots in
    declared order, which makes the witness canonical and deterministic.
    """
    n = len(attrs)
    if not (template.min_attrs <= n <= template.max_attrs) or n > len(template.slots):
        return None
    required = {s.slot_id for s in template.required_slots()}
    for perm in permutations(range(len(template.slots)), n):
        assigned = {template.slots[si].slot_id for si in perm}
        if not required <= assigned:
            continue
        ok = True
        for (name, datatype), si in zip(attrs, perm):
            if datatype not in template.slots[si].allowed:
                ok = False
                break
        if ok:
            # emit in slot-declaration order for stable serialization
            by_slot = {template.slots[si].slot_id: attrs[i][0] for i, si in enumerate(perm)}
            return {
                s.slot_id: by_slot[s.slot_id] for s in template.slots if s.slot_id in by_slot
            }
    return None


def feasible_charts(
    attributes: Mapping[str, str], catalog: Optional[ChartCatalog] = None
) -> FeasibleSet:
    """All templates admitting the attribute set, with canonical witnesses."""
    catalog = catalog or default_catalog()
    if not 1 <= len(attributes) <= 4:
        raise ValueError(f"feasibility needs 1-4 attributes, got {len(attributes)}")
    attrs = list(attributes.items())
    found = []
    for template in catalog.templates:
        witness = _witness(template, attrs)
        if witness is not None:
            found.append(FeasibleChart(template_id=template.id, witness=witness))
    if not found:
        raise NoFeasibleChart(
            f"no template admits datatypes {dict(attributes)!r}"
        )
    return FeasibleSet(feasible=tuple(found))


@dataclass(frozen=True)
class Intent:
    category: Optional[str] = None
    chart_request: Optional[str] = None  # matched display-name phrase
    requested_ids: tuple[str, ...] = ()


def _chart_phrases(catalog: ChartCatalog) -> list[tuple[str, tuple[str, ...]]]:
    """Display-name phrases to template-id families, longest phrase first."""
    families: dict[str, list[str]] = {}
    for template in catalog.templates:
        phrase = template.display_name.lower().replace(" (2nd method)", "")
        families.setdefault(phrase, []).append(template.id)
        # accept the name without a trailing "chart"/"histogram" qualifier
        if phrase.endswith(" chart"):
            families.setdefault(phrase[: -len(" chart")], []).append(template.id)
    ordered = sorted(families.items(), key=lambda kv: -len(kv[0]))
    return [(phrase, tuple(ids)) for phrase, ids in ordered]


def detect_intent(user_prompt: str, catalog: Optional[ChartCatalog] = None) -> Intent:
    """Keyword scan for taxonomy intent plus explicit chart-type mentions."""
    catalog = catalog or default_catalog()
    lowered = " ".join(user_prompt.lower().split())
    category = None
    for name, keywords in _INTENT_KEYWORDS:
        if any(kw in lowered for kw in keywords):
            category = name
            break
    chart_request = None
    requested: tuple[str, ...] = ()
    for phrase, ids in _chart_phrases(catalog):
        if re.search(rf"\b{re.escape(phrase)}\b", lowered):
            chart_request = phrase
            requested = ids
            break
    return Intent(category=category, chart_request=chart_request, requested_ids=requested)


def _hint_violations(
    template: ChartTemplate,
    witness: Mapping[str, str],
    cardinalities: Optional[Mapping[str, int]],
    percent_wanted: bool,
) -> int:
    violations = 0
    if template.percent_variant is not None and template.percent_variant != percent_wanted:
        violations += 1
    if not cardinalities:
        return violations
    hints = template.cardinality_hints

    def check(slot_id: str, low_key: str, high_key: str) -> int:
        attr = witness.get(slot_id)
        if attr is None or attr not in cardinalities:
            return 0
        n = cardinalities[attr]
        bad = 0
        if low_key in hints and n < hints[low_key]:
            bad += 1
        if high_key in hints and n > hints[high_key]:
            bad += 1
        return bad

    violations += check("label", "label_min", "label_max")
    violations += check("x", "x_min", "x_max")
    violations += check("color_series", "series_min", "series_max")
    violations += check("bin_target", "bin_min", "bin_max")
    return violations


def _rank_candidates(
    entries: Sequence[FeasibleChart],
    catalog: ChartCatalog,
    intent: Intent,
    cardinalities: Optional[Mapping[str, int]],
    percent_wanted: bool,
) -> list[FeasibleChart]:
    """Order candidates: intent category first, fewest hint violations,
    then catalog priority (or global order when intent is unknown)."""
    in_category = [
        e
        for e in entries
        if catalog.by_id[e.template_id].taxonomy_category == intent.category
    ]
    scoped = in_category or list(entries)

    def key(entry: FeasibleChart):
        template = catalog.by_id[entry.template_id]
        violations = _hint_violations(template, entry.witness, cardinalities, percent_wanted)
        rank = template.priority if in_category else catalog.global_rank(entry.template_id)
        return (violations, rank, entry.template_id)

    return sorted(scoped, key=key)


def _resolve_chart_answer(catalog: ChartCatalog, text: str) -> Optional[str]:
    """Map an LLM chart answer (id or display name) to a template id."""
    cleaned = text.strip().lower()
    if cleaned in catalog.by_id:
        return cleaned
    by_name = {t.display_name.lower(): t.id for t in catalog.templates}
    return by_name.get(cleaned)


@dataclass(frozen=True)
class SelectionMeta:
    method: str  # user_request | llm | fallback
    attempts: int
    fell_back: bool
    overridden_answer: Optional[str] = None
    reasoning: str = ""


def recommend_chart(
    feasible: FeasibleSet,
    user_prompt: str,
    intent: Intent,
    catalog: Optional[ChartCatalog] = None,
    client: Optional[LlmClient] = None,
    use_llm: bool = True,
    chart_preference: str = "user_first",
    attributes: Optional[Mapping[str, str]] = None,
    cardinalities: Optional[Mapping[str, int]] = None,
) -> tuple[ChartSpec, SelectionMeta]:
    """Pick one feasible template and return its witness-encoded spec.

    ``chart_preference="user_first"`` honors an explicit user chart request
    before consulting the model; ``"model_first"`` reproduces the
    model-overrides-user behavior.
    """
    catalog = catalog or default_catalog()
    if not feasible.feasible:
        raise NoFeasibleChart("recommend_chart needs a nonempty feasible set")
    percent_wanted = "percent" in user_prompt.lower()

    if chart_preference == "user_first" and intent.requested_ids:
        requested = [e for e in feasible.feasible if e.template_id in intent.requested_ids]
        if requested:
            best = _rank_candidates(requested, catalog, intent, cardinalities, percent_wanted)[0]
            spec = ChartSpec(
                template_id=best.template_id,
                assignments=dict(best.witness),
                reasoning=f"user requested {intent.chart_request!r}",
            )
            return spec, SelectionMeta(method="user_request", attempts=0, fell_back=False)

    attempts = 0
    overridden = None
    if use_llm and client is not None and len(feasible.feasible) > 1:
        feasible_lines = "\n".join(
            f"- {e.template_id}: {catalog.by_id[e.template_id].display_name}"
            f" ({catalog.by_id[e.template_id].abela_branch})"
            for e in feasible.feasible
        )
        attr_lines = "\n".join(
            f"- {name}: {kind}" for name, kind in (attributes or {}).items()
        )
        bindings = {
            "user_prompt": user_prompt,
            "attributes": attr_lines or "(not provided)",
            "feasible": feasible_lines,
        }
        for _ in range(2):  # one retry on invalid membership
            attempts += 1
            call = client.call("chart_select", bindings)
            if not call.ok:
                overridden = call.error
                continue
            choice = _resolve_chart_answer(catalog, call.answer.answer["chart"])
            entry = feasible.get(choice) if choice else None
            if entry is None:
                overridden = call.answer.answer["chart"]
                continue
            spec = ChartSpec(
                template_id=entry.template_id,
                assignments=dict(entry.witness),
                reasoning=call.answer.reasoning,
            )
            return spec, SelectionMeta(
                method="llm", attempts=attempts, fell_back=False
            )

    best = _rank_candidates(feasible.feasible, catalog, intent, cardinalities, percent_wanted)[0]
    spec = ChartSpec(
        template_id=best.template_id,
        assignments=dict(best.witness),
        reasoning="deterministic taxonomy-priority selection",
    )
    return spec, SelectionMeta(
        method="fallback",
        attempts=attempts,
        fell_back=attempts > 0,
        overridden_answer=overridden,
    )


def _fill_options(
    template: ChartTemplate,
    assignments: Mapping[str, str],
    top_n: int = 20,
) -> dict:
    """Deterministic rendering hints for a finished assignment."""
    options: dict = {}
    first_quant = None
    for slot in template.slots:
        attr = assignments.get(slot.slot_id)
        if attr and slot.allowed <= {"discrete", "continuous"}:
            first_quant = attr
            break
    if first_quant is not None:
        options["sort_by"] = first_quant
        options["sort_order"] = "desc"
    options["top_n"] = top_n
    if template.percent_variant is not None:
        options["percent_normalized"] = template.percent_variant
    has_frequency = any(s.slot_id == "frequency" for s in template.slots)
    if has_frequency and "frequency" not in assignments:
        options["frequency"] = "count"
    if template.second_method:
        options["second_method"] = True
    return options


def encode_chart(
    template: ChartTemplate,
    attributes: Mapping[str, str],
    user_prompt: str,
    witness: Mapping[str, str],
    client: Optional[LlmClient] = None,
    use_llm: bool = True,
    top_n: int = 20,
) -> tuple[ChartSpec, SelectionMeta]:
    """Final slot assignment: LLM proposal validated against slot
    constraints (one retry), else the canonical feasibility witness."""
    attempts = 0
    overridden = None
    if use_llm and client is not None:
        slot_lines = "\n".join(
            f"- {s.slot_id}: {' or '.join(sorted(s.allowed))}"
            f" ({'required' if s.required else 'optional'})"
            for s in template.slots
        )
        attr_lines = "\n".join(f"- {name}: {kind}" for name, kind in attributes.items())
        bindings = {
            "chart": f"{template.display_name} ({template.id})",
            "slots": slot_lines,
            "attributes": attr_lines,
            "user_prompt": user_prompt,
        }
        for _ in range(2):
            attempts += 1
            call = client.call("chart_encode", bindings)
            if not call.ok:
                overridden = call.error
                continue
            proposed = dict(call.answer.answer["assignments"])
            candidate = ChartSpec(template_id=template.id, assignments=proposed)
            if validate_spec(candidate, _single_template_catalog(template), attributes):
                overridden = json.dumps(proposed, sort_keys=True)
                continue
            ordered = {
                s.slot_id: proposed[s.slot_id]
                for s in template.slots
                if s.slot_id in proposed
            }
            spec = ChartSpec(
                template_id=template.id,
                assignments=ordered,
                options=_fill_options(template, ordered, top_n),
                reasoning=call.answer.reasoning,
            )
            return spec, SelectionMeta(method="llm", attempts=attempts, fell_back=False)

    spec = ChartSpec(
        template_id=template.id,
        assignments=dict(witness),
        options=_fill_options(template, witness, top_n),
        reasoning="canonical witness assignment",
    )
    return spec, SelectionMeta(
        method="fallback",
        attempts=attempts,
        fell_back=attempts > 0,
        overridden_answer=overridden,
    )


def _single_template_catalog(template: ChartTemplate) -> ChartCatalog:
    return ChartCatalog([template], [template.id])
