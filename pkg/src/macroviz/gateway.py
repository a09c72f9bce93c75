"""Provider-agnostic LLM access.

Three pieces:

* a template registry loading plain-text prompt files whose ``{name}``
  tokens are the declared placeholders;
* chat providers: a live HTTP provider speaking a chat-completion wire
  format, and a scripted provider that replays answers from a store keyed
  by (template id, hash of the rendered prompt);
* structured extraction that pulls the last well-formed JSON object out of
  a response, validates it against the template's output schema, and treats
  everything else as chain-of-thought reasoning.

Replay entries hold an ordered list of texts per key: retried steps render
the identical prompt, so the scripted provider hands out the entries in
call order (repeating the last), which lets fixtures script sequences like
"three invalid queries, then a valid one".
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Optional, Protocol

from .errors import (
    MissingBinding,
    NoJsonFound,
    ProviderHTTPError,
    ProviderTimeout,
    ReplayMiss,
    SchemaMismatch,
    StorageError,
    UnknownTemplate,
)

TEMPLATE_IDS = (
    "reiterate",
    "role",
    "attr_filter",
    "sql_transform",
    "datatype",
    "chart_select",
    "chart_encode",
)

# answer field -> kind, per template
OUTPUT_SCHEMAS: dict[str, dict[str, str]] = {
    "reiterate": {"command": "text"},
    "role": {"role": "text"},
    "attr_filter": {"attributes": "text_list"},
    "sql_transform": {"sql": "text"},
    "datatype": {"datatypes": "text_map"},
    "chart_select": {"chart": "text"},
    "chart_encode": {"assignments": "text_map"},
}

_PLACEHOLDER_RE = re.compile(r"\{([a-z][a-z0-9_]*)\}")


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    text: str
    output_schema: Mapping[str, str]
    placeholders: frozenset[str]


class TemplateRegistry:
    """Loads one plain-text file per template id from a directory."""

    def __init__(self, templates: dict[str, PromptTemplate]):
        self._templates = templates

    @classmethod
    def load_dir(cls, path: Path) -> "TemplateRegistry":
        templates: dict[str, PromptTemplate] = {}
        for template_id in TEMPLATE_IDS:
            file = path / f"{template_id}.txt"
            if not file.exists():
                continue
            text = file.read_text(encoding="utf-8")
            templates[template_id] = PromptTemplate(
                id=template_id,
                text=text,
                output_schema=OUTPUT_SCHEMAS[template_id],
                placeholders=frozenset(_PLACEHOLDER_RE.findall(text)),
            )
        return cls(templates)

    @classmethod
    def load_default(cls) -> "TemplateRegistry":
        return cls.load_dir(Path(__file__).parent / "templates")

    def get(self, template_id: str) -> PromptTemplate:
        try:
            return self._templates[template_id]
        except KeyError:
            raise UnknownTemplate(template_id) from None

    def ids(self) -> list[str]:
        return list(self._templates)


def render_prompt(
    registry: TemplateRegistry, template_id: str, bindings: Mapping[str, str]
) -> str:
    """Substitute placeholders; binding values are embedded verbatim.

    Substitution is a single regex pass over the template, so braces inside
    bound values (JSON profiles, SQL) are never re-interpreted.
    """
    template = registry.get(template_id)
    missing = template.placeholders - set(bindings)
    if missing:
        raise MissingBinding(
            f"template {template_id!r} missing bindings: {sorted(missing)}"
        )

    def _sub(match: re.Match) -> str:
        return str(bindings[match.group(1)])

    return _PLACEHOLDER_RE.sub(_sub, template.text)


@dataclass(frozen=True)
class ChatRequest:
    template_id: str
    rendered: str
    temperature: float = 0.0
    max_tokens: int = 1024
    model: str = "gpt-4o"


@dataclass(frozen=True)
class ChatResponse:
    text: str
    total_tokens: int = 0
    latency: float = 0.0


def prompt_hash(rendered: str) -> str:
    """Whitespace-stable prompt hash keying the replay store.

    All whitespace runs collapse to single spaces before hashing, so
    formatting-only template tweaks keep fixtures valid while wording
    changes invalidate them.
    """
    normalized = " ".join(rendered.split())
    return hashlib.sha256(normalized.encode("utf-8")).hexdigest()


class Provider(Protocol):
    def complete(self, request: ChatRequest) -> ChatResponse: ...


class ReplayStore:
    """Scripted answers: template id -> prompt hash -> ordered response texts.

    Serialized as one JSON file per template id in a directory, so fixture
    sets stay diffable and per-step.
    """

    def __init__(self) -> None:
        self._entries: dict[str, dict[str, list[str]]] = {}
        self._write_lock = threading.Lock()

    def record(self, template_id: str, prompt_digest: str, text: str) -> None:
        with self._write_lock:
            bucket = self._entries.setdefault(template_id, {})
            bucket.setdefault(prompt_digest, []).append(text)

    def lookup(self, template_id: str, prompt_digest: str) -> Optional[list[str]]:
        return self._entries.get(template_id, {}).get(prompt_digest)

    def entry_count(self) -> int:
        return sum(len(texts) for bucket in self._entries.values() for texts in bucket.values())

    def save_dir(self, path: Path) -> None:
        try:
            path.mkdir(parents=True, exist_ok=True)
            for template_id, bucket in sorted(self._entries.items()):
                doc = {
                    "template_id": template_id,
                    "entries": {h: texts for h, texts in sorted(bucket.items())},
                }
                file = path / f"{template_id}.json"
                file.write_text(
                    json.dumps(doc, indent=2, ensure_ascii=True) + "\n",
                    encoding="utf-8",
                )
        except OSError as exc:
            raise StorageError(str(exc)) from exc

    @classmethod
    def load_dir(cls, path: Path) -> "ReplayStore":
        store = cls()
        try:
            if not path.exists():
                return store
            for file in sorted(path.glob("*.json")):
                doc = json.loads(file.read_text(encoding="utf-8"))
                template_id = doc["template_id"]
                for digest, texts in doc["entries"].items():
                    for text in texts:
                        store.record(template_id, digest, text)
        except (OSError, json.JSONDecodeError, KeyError) as exc:
            raise StorageError(str(exc)) from exc
        return store


def record_fixture(store: ReplayStore, request: ChatRequest, response: ChatResponse) -> None:
    """Append one exchange to the replay store."""
    store.record(request.template_id, prompt_hash(request.rendered), response.text)


class ScriptedProvider:
    """Replays stored answers; sequential per key, repeating the last."""

    def __init__(self, store: ReplayStore):
        self._store = store
        self._cursors: dict[tuple[str, str], int] = {}

    def complete(self, request: ChatRequest) -> ChatResponse:
        digest = prompt_hash(request.rendered)
        texts = self._store.lookup(request.template_id, digest)
        if not texts:
            raise ReplayMiss(f"{request.template_id}:{digest[:12]}")
        key = (request.template_id, digest)
        idx = self._cursors.get(key, 0)
        self._cursors[key] = idx + 1
        return ChatResponse(text=texts[min(idx, len(texts) - 1)])


class RecordingProvider:
    """Wraps another provider, appending every exchange to a replay store."""

    def __init__(self, inner: Provider, store: ReplayStore):
        self._inner = inner
        self.store = store

    def complete(self, request: ChatRequest) -> ChatResponse:
        response = self._inner.complete(request)
        record_fixture(self.store, request, response)
        return response


class LiveProvider:
    """Chat-completion HTTP client with timeout and bounded retries.

    Retries transport errors and 5xx statuses up to ``max_attempts`` total
    calls; 4xx statuses fail immediately. At most ``max_in_flight``
    requests run concurrently.
    """

    def __init__(
        self,
        base_url: str,
        api_key: str = "",
        timeout: float = 30.0,
        max_attempts: int = 3,
        retry_wait: float = 0.0,
        max_in_flight: int = 4,
    ):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.retry_wait = retry_wait
        self._in_flight = threading.Semaphore(max_in_flight)

    def complete(self, request: ChatRequest) -> ChatResponse:
        with self._in_flight:
            return self._complete(request)

    def _complete(self, request: ChatRequest) -> ChatResponse:
        body = json.dumps(
            {
                "model": request.model,
                "messages": [{"role": "user", "content": request.rendered}],
                "temperature": request.temperature,
                "max_tokens": request.max_tokens,
            }
        ).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"

        last_error: Exception = ProviderHTTPError(0, "no attempt made")
        for attempt in range(self.max_attempts):
            if attempt and self.retry_wait:
                time.sleep(self.retry_wait)
            req = urllib.request.Request(
                f"{self.base_url}/chat/completions", data=body, headers=headers
            )
            started = time.monotonic()
            try:
                with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    payload = json.loads(resp.read().decode("utf-8"))
            except urllib.error.HTTPError as exc:
                if 500 <= exc.code < 600:
                    last_error = ProviderHTTPError(exc.code, "server error")
                    continue
                raise ProviderHTTPError(exc.code, exc.reason or "") from exc
            except TimeoutError as exc:
                raise ProviderTimeout(str(exc)) from exc
            except urllib.error.URLError as exc:
                if isinstance(exc.reason, TimeoutError):
                    raise ProviderTimeout(str(exc.reason)) from exc
                last_error = ProviderHTTPError(0, str(exc.reason))
                continue
            latency = time.monotonic() - started
            text = payload["choices"][0]["message"]["content"]
            usage = payload.get("usage", {})
            return ChatResponse(
                text=text,
                total_tokens=int(usage.get("total_tokens", 0)),
                latency=latency,
            )
        raise last_error


def complete(request: ChatRequest, provider: Provider) -> ChatResponse:
    """Run one chat exchange against the given provider."""
    return provider.complete(request)


@dataclass(frozen=True)
class StructuredAnswer:
    reasoning: str
    answer: Any


def _json_object_spans(text: str) -> list[tuple[int, int, Any]]:
    """All maximal well-formed top-level JSON object spans in ``text``."""
    spans = []
    i = 0
    while i < len(text):
        if text[i] != "{":
            i += 1
            continue
        end = _match_brace(text, i)
        if end is None:
            i += 1
            continue
        candidate = text[i : end + 1]
        try:
            value = json.loads(candidate)
        except json.JSONDecodeError:
            i += 1
            continue
        if isinstance(value, dict):
            spans.append((i, end + 1, value))
            i = end + 1
        else:
            i += 1
    return spans


def _match_brace(text: str, start: int) -> Optional[int]:
    depth = 0
    in_string = False
    escaped = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return i
    return None


def extract_structured(
    response: ChatResponse, schema: Mapping[str, str]
) -> StructuredAnswer:
    """Split a response into (reasoning, schema-validated answer).

    The last well-formed JSON object wins; all remaining text becomes the
    reasoning. Raises NoJsonFound / SchemaMismatch so callers can retry.
    """
    spans = _json_object_spans(response.text)
    if not spans:
        raise NoJsonFound("no JSON object in response")
    start, end, value = spans[-1]
    reasoning = (response.text[:start] + response.text[end:]).strip()
    _validate_schema(value, schema)
    return StructuredAnswer(reasoning=reasoning, answer=value)


def _validate_schema(value: dict, schema: Mapping[str, str]) -> None:
    for name, kind in schema.items():
        if name not in value:
            raise SchemaMismatch(f"missing field {name!r}")
        got = value[name]
        if kind == "text":
            if not isinstance(got, str):
                raise SchemaMismatch(f"field {name!r} must be text")
        elif kind == "text_list":
            if not isinstance(got, list) or not all(isinstance(v, str) for v in got):
                raise SchemaMismatch(f"field {name!r} must be a list of text")
        elif kind == "text_map":
            if not isinstance(got, dict) or not all(
                isinstance(k, str) and isinstance(v, str) for k, v in got.items()
            ):
                raise SchemaMismatch(f"field {name!r} must be a text-to-text map")
        else:  # pragma: no cover - schema kinds are fixed above
            raise SchemaMismatch(f"unknown schema kind {kind!r}")


@dataclass
class StructuredCall:
    """Outcome of one render -> complete -> extract round trip."""

    template_id: str
    request: Optional[ChatRequest]
    response: Optional[ChatResponse]
    answer: Optional[StructuredAnswer]
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.answer is not None


class LlmClient:
    """Bundles registry + provider + per-template model config for the steps."""

    def __init__(
        self,
        registry: TemplateRegistry,
        provider: Provider,
        models: Optional[Mapping[str, str]] = None,
        temperature: float = 0.0,
        max_tokens: int = 1024,
    ):
        self.registry = registry
        self.provider = provider
        self.models = dict(models or {})
        self.temperature = temperature
        self.max_tokens = max_tokens

    def model_for(self, template_id: str) -> str:
        return self.models.get(template_id, self.models.get("default", "gpt-4o"))

    def call(self, template_id: str, bindings: Mapping[str, str]) -> StructuredCall:
        """One structured exchange; provider/extraction failures are captured,
        template misuse (unknown id, unbound placeholder) raises."""
        rendered = render_prompt(self.registry, template_id, bindings)
        request = ChatRequest(
            template_id=template_id,
            rendered=rendered,
            temperature=self.temperature,
            max_tokens=self.max_tokens,
            model=self.model_for(template_id),
        )
        try:
            response = self.provider.complete(request)
        except (ProviderTimeout, ProviderHTTPError, ReplayMiss) as exc:
            return StructuredCall(template_id, request, None, None, error=str(exc) or type(exc).__name__)
        schema = self.registry.get(template_id).output_schema
        try:
            answer = extract_structured(response, schema)
        except (NoJsonFound, SchemaMismatch) as exc:
            return StructuredCall(
                template_id, request, response, None, error=str(exc) or type(exc).__name__
            )
        return StructuredCall(template_id, request, response, answer)
