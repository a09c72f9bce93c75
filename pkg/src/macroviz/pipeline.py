"""The end-to-end pipeline: CSV + prompt in, charts + data + trace out.

Step order (optional steps in brackets): [reiterate] -> decompose ->
[attr_filter] -> sql_transform -> charting_filter -> datatype ->
chart_select -> encode. A one-row SQL result ends the run right after the
transform step with a table response; an infeasible attribute combination
does the same with the transformed data. Every executed step leaves a
StepTrace carrying its reasoning, attempt count, and fallback flag.

Under the scripted provider the whole pipeline is a pure function of
(CSV, prompt, config, replay store): each run gets a fresh provider cursor
and, by default, zeroed step timings, so responses are byte-identical
across runs.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import attributes as attr_step
from . import catalog as chartcat
from . import datatypes as dt_step
from . import knowledge, sqlrun
from .config import PipelineConfig
from .dataset import dataset_to_csv, parse_csv, profile_dataset
from .errors import BadCsv, EmptyPrompt, MacrovizError, NoFeasibleChart
from .gateway import (
    LiveProvider,
    LlmClient,
    Provider,
    RecordingProvider,
    ReplayStore,
    ScriptedProvider,
    TemplateRegistry,
)

STEP_IDS = (
    "reiterate",
    "decompose",
    "attr_filter",
    "sql_transform",
    "charting_filter",
    "datatype",
    "chart_select",
    "encode",
)


@dataclass(frozen=True)
class RequestOptions:
    """Per-request overrides; None means "use the config default"."""

    reiteration: Optional[bool] = None
    attr_filter: Optional[bool] = None
    sql_suggestions: Optional[bool] = None
    chart_preference: Optional[str] = None

    @classmethod
    def from_dict(cls, raw: dict) -> "RequestOptions":
        return cls(
            reiteration=raw.get("reiteration"),
            attr_filter=raw.get("attr_filter"),
            sql_suggestions=raw.get("sql_suggestions"),
            chart_preference=raw.get("chart_preference"),
        )


@dataclass(frozen=True)
class VisualizeRequest:
    csv: bytes
    prompt: str
    mode: str = "recommend"  # recommend | feasible
    options: RequestOptions = field(default_factory=RequestOptions)


@dataclass
class StepTrace:
    step_id: str
    reasoning: str = ""
    attempts: int = 0
    fell_back: bool = False
    elapsed: float = 0.0
    artifacts: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "step_id": self.step_id,
            "reasoning": self.reasoning,
            "attempts": self.attempts,
            "fell_back": self.fell_back,
            "elapsed": self.elapsed,
            "artifacts": self.artifacts,
        }


@dataclass
class VisualizeResponse:
    kind: str  # charts | table
    charts: list[chartcat.ChartSpec]
    dataset_csv: str
    trace: list[StepTrace]

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "charts": [c.to_json_dict() for c in self.charts],
            "dataset_csv": self.dataset_csv,
            "trace": [t.to_json_dict() for t in self.trace],
        }

    def to_json_bytes(self) -> bytes:
        return json.dumps(
            self.to_json_dict(), ensure_ascii=True, separators=(",", ":")
        ).encode("utf-8")


class PipelineRuntime:
    """Artifacts shared across requests: templates, catalog, index, store.

    All of it is read-only at serve time; each request builds its own client
    so scripted-replay cursors never leak between runs.
    """

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.registry = (
            TemplateRegistry.load_dir(Path(config.templates_dir))
            if config.templates_dir
            else TemplateRegistry.load_default()
        )
        self.catalog = (
            chartcat.ChartCatalog.load(Path(config.catalog_path))
            if config.catalog_path
            else chartcat.ChartCatalog.load_default()
        )
        docs = (
            knowledge.load_docs(Path(config.functions_path))
            if config.functions_path
            else knowledge.load_default_docs()
        )
        self.function_index = knowledge.index_docs(docs)
        self.replay_store = (
            ReplayStore.load_dir(Path(config.replay_dir))
            if config.replay_dir
            else ReplayStore()
        )
        # one live provider per runtime so the in-flight cap spans requests
        self._live: Optional[Provider] = None
        if config.provider == "live":
            live: Provider = LiveProvider(
                base_url=config.base_url,
                api_key=config.api_key,
                timeout=config.http_timeout,
                max_attempts=config.http_max_attempts,
                max_in_flight=config.max_in_flight,
            )
            self._live = (
                RecordingProvider(live, self.replay_store) if config.record else live
            )

    def make_provider(self) -> Provider:
        if self._live is not None:
            return self._live
        # scripted cursors are per run: sequential replay must restart fresh
        return ScriptedProvider(self.replay_store)

    def make_client(self, provider: Optional[Provider] = None) -> LlmClient:
        return LlmClient(
            registry=self.registry,
            provider=provider or self.make_provider(),
            models=self.config.models,
            temperature=self.config.temperature,
            max_tokens=self.config.max_tokens,
        )


def run_pipeline(
    request: VisualizeRequest,
    runtime: PipelineRuntime,
    client: Optional[LlmClient] = None,
) -> VisualizeResponse:
    """Execute the pipeline for one request. Never raises past request
    validation: provider misbehavior degrades through per-step fallbacks."""
    config = runtime.config
    if not request.prompt or not request.prompt.strip():
        raise EmptyPrompt("prompt must be nonempty")
    if request.mode not in ("recommend", "feasible"):
        raise BadCsv(f"unknown mode {request.mode!r}")
    if len(request.csv) > config.max_csv_bytes:
        raise BadCsv(f"CSV exceeds {config.max_csv_bytes} bytes")
    try:
        dataset = parse_csv(request.csv)
    except MacrovizError as exc:
        raise BadCsv(f"{type(exc).__name__}: {exc}") from exc
    if dataset.row_count > config.max_rows:
        raise BadCsv(f"CSV exceeds {config.max_rows} rows")

    client = client or runtime.make_client()
    deterministic = config.trace_is_deterministic()
    trace: list[StepTrace] = []

    def timed(step: StepTrace, started: float) -> StepTrace:
        step.elapsed = 0.0 if deterministic else time.perf_counter() - started
        trace.append(step)
        return step

    opts = request.options
    reiteration_on = config.reiteration if opts.reiteration is None else opts.reiteration
    attr_filter_on = config.attr_filter if opts.attr_filter is None else opts.attr_filter
    suggestions_on = (
        config.sql_suggestions if opts.sql_suggestions is None else opts.sql_suggestions
    )
    chart_preference = opts.chart_preference or config.chart_preference

    # A. reiteration: rewrite indirect speech into a visualization command
    command = request.prompt.strip()
    if reiteration_on:
        started = time.perf_counter()
        call = client.call("reiterate", {"utterance": command})
        if call.ok and str(call.answer.answer["command"]).strip():
            command = str(call.answer.answer["command"]).strip()
            timed(
                StepTrace(
                    step_id="reiterate",
                    reasoning=call.answer.reasoning,
                    attempts=1,
                    artifacts={"command": command},
                ),
                started,
            )
        else:
            timed(
                StepTrace(
                    step_id="reiterate",
                    attempts=1,
                    fell_back=True,
                    artifacts={"command": command, "error": call.error},
                ),
                started,
            )

    # B. decomposition: per-attribute profiles stand in for the raw rows
    started = time.perf_counter()
    profiles = profile_dataset(dataset)
    timed(
        StepTrace(
            step_id="decompose",
            artifacts={"profiles": [p.to_json_dict() for p in profiles]},
        ),
        started,
    )

    # C. attribute filter (optional): shrink context before SQL generation
    working = dataset
    working_profiles = profiles
    role = attr_step.RoleContext(role_text="You are a data analyst.", fell_back=False)
    if attr_filter_on:
        started = time.perf_counter()
        role = attr_step.derive_role(client, list(dataset.attributes))
        selection = attr_step.filter_attributes(
            client,
            profiles,
            command,
            role,
            attr_step.PRE_TRANSFORM,
            reflection_limit=config.reflection_limit,
        )
        if not selection.fell_back:
            working = dataset.select(selection.selected)
            working_profiles = [p for p in profiles if p.name in selection.selected]
        timed(
            StepTrace(
                step_id="attr_filter",
                reasoning=selection.reasoning,
                attempts=selection.attempts,
                fell_back=selection.fell_back,
                artifacts={
                    "role": role.role_text,
                    "role_fell_back": role.fell_back,
                    "selected": list(selection.selected),
                },
            ),
            started,
        )

    # D. SQL transformation with validation, fresh retries, and bypass
    started = time.perf_counter()
    suggestions_disabled = (
        not suggestions_on or sqlrun.suggestions_disabled_by_prompt(command)
    )
    retrieved = (
        []
        if suggestions_disabled
        else knowledge.top_k(runtime.function_index, command, config.rag_k)
    )
    outcome = sqlrun.transform(
        client,
        working,
        command,
        working_profiles,
        retry_limit=config.sql_retry_limit,
        retrieved_docs=retrieved,
        suggestions_disabled=suggestions_disabled,
    )
    timed(
        StepTrace(
            step_id="sql_transform",
            reasoning=outcome.query.reasoning if outcome.query else "",
            attempts=outcome.attempts,
            fell_back=outcome.kind == "bypassed",
            artifacts={
                "kind": outcome.kind,
                "sql": outcome.query.text if outcome.query else None,
                "suggestions_disabled": outcome.suggestions_disabled,
                "retrieved_functions": list(outcome.retrieved_names),
                "attempt_log": [
                    {"attempt": a.attempt_index, "sql": a.sql, "error": a.error}
                    for a in outcome.attempt_log
                ],
            },
        ),
        started,
    )
    transformed = outcome.dataset

    # one-row rule: a single data point is a table, not a chart
    if outcome.kind == "table":
        return _finish(
            VisualizeResponse(
                kind="table",
                charts=[],
                dataset_csv=dataset_to_csv(transformed).decode("utf-8"),
                trace=trace,
            ),
            request,
            config,
        )

    # E. charting attribute filter over the transformed data
    started = time.perf_counter()
    post_profiles = profile_dataset(transformed)
    charting = attr_step.filter_attributes(
        client,
        post_profiles,
        command,
        role,
        attr_step.CHARTING,
        reflection_limit=config.reflection_limit,
    )
    timed(
        StepTrace(
            step_id="charting_filter",
            reasoning=charting.reasoning,
            attempts=charting.attempts,
            fell_back=charting.fell_back,
            artifacts={"selected": list(charting.selected)},
        ),
        started,
    )
    chart_attrs = list(charting.selected)
    chart_profiles = [p for p in post_profiles if p.name in chart_attrs]

    # F. datatype classification (heuristic by default)
    started = time.perf_counter()
    datatype_map, dt_call = dt_step.classify_all(
        post_profiles,
        command,
        client=client,
        use_llm=config.datatype_llm,
        unique_ratio=config.discrete_unique_ratio,
        unique_floor=config.discrete_unique_floor,
    )
    timed(
        StepTrace(
            step_id="datatype",
            reasoning=dt_call.answer.reasoning if dt_call and dt_call.ok else "",
            attempts=1 if dt_call else 0,
            fell_back=bool(dt_call and not dt_call.ok),
            artifacts={"datatypes": {k: datatype_map[k] for k in datatype_map}},
        ),
        started,
    )

    selected_types = {name: datatype_map[name] for name in chart_attrs}
    cardinalities = {p.name: p.unique_count for p in chart_profiles}

    # G. chart selection via constraint satisfaction (+ recommendation)
    started = time.perf_counter()
    try:
        feasible = chartcat.feasible_charts(selected_types, runtime.catalog)
    except NoFeasibleChart as exc:
        timed(
            StepTrace(
                step_id="chart_select",
                fell_back=True,
                artifacts={"error": str(exc), "feasible": []},
            ),
            started,
        )
        return _finish(
            VisualizeResponse(
                kind="table",
                charts=[],
                dataset_csv=dataset_to_csv(transformed).decode("utf-8"),
                trace=trace,
            ),
            request,
            config,
        )

    intent = chartcat.detect_intent(command, runtime.catalog)

    if request.mode == "feasible":
        timed(
            StepTrace(
                step_id="chart_select",
                artifacts={
                    "mode": "feasible",
                    "feasible": feasible.ids(),
                    "intent": intent.category,
                },
            ),
            started,
        )
        started = time.perf_counter()
        charts = []
        for entry in feasible.feasible:
            template = runtime.catalog.by_id[entry.template_id]
            spec, _ = chartcat.encode_chart(
                template,
                selected_types,
                command,
                entry.witness,
                use_llm=False,
                top_n=config.top_n_categories,
            )
            charts.append(spec)
        timed(
            StepTrace(step_id="encode", artifacts={"charts": len(charts)}),
            started,
        )
        return _finish(
            VisualizeResponse(
                kind="charts",
                charts=charts,
                dataset_csv=dataset_to_csv(transformed).decode("utf-8"),
                trace=trace,
            ),
            request,
            config,
        )

    recommended, select_meta = chartcat.recommend_chart(
        feasible,
        command,
        intent,
        catalog=runtime.catalog,
        client=client,
        use_llm=config.chart_llm,
        chart_preference=chart_preference,
        attributes=selected_types,
        cardinalities=cardinalities,
    )
    timed(
        StepTrace(
            step_id="chart_select",
            reasoning=recommended.reasoning,
            attempts=select_meta.attempts,
            fell_back=select_meta.fell_back,
            artifacts={
                "feasible": feasible.ids(),
                "intent": intent.category,
                "chart_request": intent.chart_request,
                "method": select_meta.method,
                "selected": recommended.template_id,
                "overridden_answer": select_meta.overridden_answer,
            },
        ),
        started,
    )

    # H. encoding: slot assignment validated against the template
    started = time.perf_counter()
    template = runtime.catalog.by_id[recommended.template_id]
    witness_entry = feasible.get(recommended.template_id)
    final_spec, encode_meta = chartcat.encode_chart(
        template,
        selected_types,
        command,
        witness_entry.witness if witness_entry else recommended.assignments,
        client=client,
        use_llm=config.encode_llm,
        top_n=config.top_n_categories,
    )
    timed(
        StepTrace(
            step_id="encode",
            reasoning=final_spec.reasoning,
            attempts=encode_meta.attempts,
            fell_back=encode_meta.fell_back,
            artifacts={
                "method": encode_meta.method,
                "assignments": dict(final_spec.assignments),
                "options": dict(final_spec.options),
            },
        ),
        started,
    )

    return _finish(
        VisualizeResponse(
            kind="charts",
            charts=[final_spec],
            dataset_csv=dataset_to_csv(transformed).decode("utf-8"),
            trace=trace,
        ),
        request,
        config,
    )


def _finish(
    response: VisualizeResponse, request: VisualizeRequest, config: PipelineConfig
) -> VisualizeResponse:
    if config.trace_log:
        entry = {
            "prompt": request.prompt,
            "mode": request.mode,
            "kind": response.kind,
            "trace": [t.to_json_dict() for t in response.trace],
        }
        with open(config.trace_log, "a", encoding="utf-8") as handle:
            handle.write(json.dumps(entry, ensure_ascii=True) + "\n")
    return response
