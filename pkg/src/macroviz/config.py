"""Pipeline configuration: file values, environment overrides, defaults.

The config file is a flat JSON object whose keys match the field names
below. Environment variables override provider settings:

* ``MACROVIZ_LLM_API_KEY``: live-provider API key
* ``MACROVIZ_LLM_BASE_URL``: live-provider endpoint base
* ``MACROVIZ_LLM_MODEL_<TEMPLATE_ID>``: per-stage model name, e.g.
  ``MACROVIZ_LLM_MODEL_SQL_TRANSFORM=gpt-4`` (the SQL step historically
  wants a stronger model than the rest of the chain).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from .gateway import TEMPLATE_IDS


def _default_models() -> dict[str, str]:
    return {
        "default": "gpt-4o",
        "sql_transform": "gpt-4",
        "chart_select": "gpt-4o-mini",
    }


@dataclass
class PipelineConfig:
    # provider
    provider: str = "scripted"  # scripted | live
    replay_dir: Optional[str] = None
    record: bool = False
    base_url: str = ""
    api_key: str = ""
    models: dict = field(default_factory=_default_models)
    temperature: float = 0.0
    max_tokens: int = 1024
    http_timeout: float = 30.0
    http_max_attempts: int = 3
    max_in_flight: int = 4

    # retry budgets
    sql_retry_limit: int = 4
    reflection_limit: int = 3

    # retrieval
    rag_k: int = 15

    # step toggles
    reiteration: bool = False
    attr_filter: bool = True
    sql_suggestions: bool = True
    datatype_llm: bool = False
    chart_llm: bool = True
    encode_llm: bool = True
    chart_preference: str = "user_first"  # user_first | model_first

    # thresholds
    discrete_unique_ratio: float = 0.5
    discrete_unique_floor: int = 20
    top_n_categories: int = 20

    # request limits
    max_csv_bytes: int = 10 * 1024 * 1024
    max_rows: int = 10000

    # artifacts
    catalog_path: Optional[str] = None
    functions_path: Optional[str] = None
    templates_dir: Optional[str] = None
    trace_log: Optional[str] = None

    # None -> deterministic exactly when the provider is scripted
    deterministic_trace: Optional[bool] = None

    def trace_is_deterministic(self) -> bool:
        if self.deterministic_trace is not None:
            return self.deterministic_trace
        return self.provider == "scripted"

    @classmethod
    def from_file(cls, path: Path) -> "PipelineConfig":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)

    def apply_env(self, env: Optional[dict] = None) -> "PipelineConfig":
        env = os.environ if env is None else env
        if env.get("MACROVIZ_LLM_API_KEY"):
            self.api_key = env["MACROVIZ_LLM_API_KEY"]
        if env.get("MACROVIZ_LLM_BASE_URL"):
            self.base_url = env["MACROVIZ_LLM_BASE_URL"]
        for template_id in TEMPLATE_IDS + ("default",):
            key = f"MACROVIZ_LLM_MODEL_{template_id.upper()}"
            if env.get(key):
                self.models[template_id] = env[key]
        return self
