"""Exception hierarchy for the macroviz pipeline.

Errors split into two families: hard errors that reject a request before the
pipeline starts (bad CSV, empty prompt), and per-step errors that the
orchestrator's retry/fallback machinery absorbs (everything SQL- or
provider-related). Only the first family ever reaches an API caller.
"""


class MacrovizError(Exception):
    """Base class for all macroviz errors."""


# --- dataset ingestion ---------------------------------------------------


class EmptyInput(MacrovizError):
    """CSV input has no header record."""


class RaggedRow(MacrovizError):
    """A CSV row's cell count differs from the header's."""


class DuplicateHeader(MacrovizError):
    """Two header names are identical after trimming whitespace."""


class UnknownAttribute(MacrovizError):
    """An attribute name does not exist in the dataset."""


# --- LLM gateway ----------------------------------------------------------


class UnknownTemplate(MacrovizError):
    """Prompt template id is not in the registry."""


class MissingBinding(MacrovizError):
    """A template placeholder was left unbound at render time."""


class ProviderTimeout(MacrovizError):
    """The live provider did not answer within the configured timeout."""


class ProviderHTTPError(MacrovizError):
    """The live provider returned a non-success HTTP status."""

    def __init__(self, status: int, detail: str = ""):
        super().__init__(f"provider returned HTTP {status}: {detail}")
        self.status = status


class ReplayMiss(MacrovizError):
    """The scripted provider has no entry for this (template, prompt hash)."""


class NoJsonFound(MacrovizError):
    """No well-formed JSON object found in a provider response."""


class SchemaMismatch(MacrovizError):
    """Extracted JSON answer does not conform to the template's output schema."""


class StorageError(MacrovizError):
    """Replay store could not be read or written."""


# --- function knowledge ----------------------------------------------------


class DuplicateFunctionName(MacrovizError):
    """Two function docs share a name."""


# --- SQL transform ----------------------------------------------------------


class SanitizationCollision(MacrovizError):
    """Two attribute names sanitize to the same SQL identifier."""


class SqlParseError(MacrovizError):
    """Generated SQL failed to parse."""


class SqlExecutionError(MacrovizError):
    """Generated SQL parsed but failed during execution."""


class NonSelectStatement(MacrovizError):
    """Generated SQL is not a single SELECT statement."""


class EmptyResult(MacrovizError):
    """Generated SQL executed but returned zero rows."""


# --- chart catalog ----------------------------------------------------------


class NoFeasibleChart(MacrovizError):
    """No catalog template admits the given attribute/datatype combination."""


# --- pipeline service -------------------------------------------------------


class BadCsv(MacrovizError):
    """Request CSV could not be parsed."""


class EmptyPrompt(MacrovizError):
    """Request prompt is empty or whitespace."""


class BindError(MacrovizError):
    """HTTP server could not bind its port."""
