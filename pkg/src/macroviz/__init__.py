"""macroviz: turn a CSV and a high-level question into chart specifications,
a transformed dataset, and a per-step reasoning trace.

All LLM access goes through a pluggable provider; the scripted provider
replays recorded answers so the full pipeline runs deterministically
offline.
"""

from .catalog import (
    ChartCatalog,
    ChartSpec,
    ChartTemplate,
    EncodingSlot,
    FeasibleSet,
    detect_intent,
    encode_chart,
    feasible_charts,
    recommend_chart,
)
from .config import PipelineConfig
from .dataset import (
    AttributeProfile,
    Dataset,
    dataset_to_csv,
    parse_csv,
    profile_attribute,
    profile_dataset,
)
from .gateway import (
    ChatRequest,
    ChatResponse,
    LiveProvider,
    LlmClient,
    ReplayStore,
    ScriptedProvider,
    StructuredAnswer,
    TemplateRegistry,
    complete,
    extract_structured,
    prompt_hash,
    record_fixture,
    render_prompt,
)
from .pipeline import (
    PipelineRuntime,
    RequestOptions,
    StepTrace,
    VisualizeRequest,
    VisualizeResponse,
    run_pipeline,
)
from .server import serve
from .sqlrun import SqlQuery, SqlSession, TransformOutcome, load_into_sql, transform

__version__ = "0.1.0"

__all__ = [
    "AttributeProfile",
    "ChartCatalog",
    "ChartSpec",
    "ChartTemplate",
    "ChatRequest",
    "ChatResponse",
    "Dataset",
    "EncodingSlot",
    "FeasibleSet",
    "LiveProvider",
    "LlmClient",
    "PipelineConfig",
    "PipelineRuntime",
    "ReplayStore",
    "RequestOptions",
    "ScriptedProvider",
    "SqlQuery",
    "SqlSession",
    "StepTrace",
    "StructuredAnswer",
    "TemplateRegistry",
    "TransformOutcome",
    "VisualizeRequest",
    "VisualizeResponse",
    "complete",
    "dataset_to_csv",
    "detect_intent",
    "encode_chart",
    "extract_structured",
    "feasible_charts",
    "load_into_sql",
    "parse_csv",
    "profile_attribute",
    "profile_dataset",
    "prompt_hash",
    "recommend_chart",
    "record_fixture",
    "render_prompt",
    "run_pipeline",
    "serve",
    "transform",
]
