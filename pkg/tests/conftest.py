"""Shared fixtures: committed CSV fixtures and scripted-provider plumbing."""

from pathlib import Path

import pytest

from macroviz.errors import ReplayMiss
from macroviz.gateway import ChatResponse, LlmClient, TemplateRegistry

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def superstore_bytes() -> bytes:
    return (DATA_DIR / "superstore.csv").read_bytes()


@pytest.fixture(scope="session")
def cars_bytes() -> bytes:
    return (DATA_DIR / "cars.csv").read_bytes()


class QueueProvider:
    """Hands out queued response texts in order, repeating the last.

    An empty queue raises ReplayMiss, which steps treat as provider failure.
    """

    def __init__(self, texts=()):
        self.texts = list(texts)
        self.requests = []

    def complete(self, request):
        self.requests.append(request)
        if not self.texts:
            raise ReplayMiss("queue empty")
        text = self.texts.pop(0) if len(self.texts) > 1 else self.texts[0]
        return ChatResponse(text=text)


@pytest.fixture(scope="session")
def registry():
    return TemplateRegistry.load_default()


@pytest.fixture
def make_client(registry):
    def _make(*texts) -> tuple[LlmClient, QueueProvider]:
        provider = QueueProvider(texts)
        return LlmClient(registry=registry, provider=provider), provider

    return _make


# --- acceptance-gate summary ---------------------------------------------

_acceptance_results: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" in report.nodeid and report.when == "call":
        name = report.nodeid.split("::")[-1]
        _acceptance_results[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in _acceptance_results.items():
        terminalreporter.write_line(f"{outcome}  {name}")
