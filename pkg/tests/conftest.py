"""Session fixtures: bundled ontology, offline guard, acceptance reporting."""
from __future__ import annotations

import socket
import time
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings as hsettings

from ontodx import (
    Iri,
    VocabularyRoots,
    build_prompt,
    extract_vocabulary,
    load_bundled_ontology,
)

hsettings.register_profile(
    "suite",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
hsettings.load_profile("suite")

SESSION_START = time.monotonic()
_ACCEPTANCE: dict[tuple[str, str], bool] = {}

REPO_ROOT = Path(__file__).resolve().parent.parent


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(num, label): acceptance criterion identity"
    )


def pytest_collection_modifyitems(items):
    # Acceptance checks summarize the suite; run them after everything else.
    items.sort(key=lambda item: Path(str(item.fspath)).name == "test_acceptance.py")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call":
        marker = item.get_closest_marker("criterion")
        if marker:
            _ACCEPTANCE[(str(marker.args[0]), marker.args[1])] = report.passed


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance criteria:")
    for (num, label), passed in sorted(_ACCEPTANCE.items(), key=lambda kv: int(kv[0][0])):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"  criterion {num}: {status} - {label}")


@pytest.fixture(scope="session", autouse=True)
def no_external_network():
    """The suite is offline: only loopback connections are allowed."""
    real_connect = socket.socket.connect

    def guarded(self, address, *args, **kwargs):
        host = address[0] if isinstance(address, tuple) else address
        if isinstance(host, str) and host not in ("127.0.0.1", "localhost", "::1"):
            raise AssertionError(f"external network access attempted: {address!r}")
        return real_connect(self, address, *args, **kwargs)

    socket.socket.connect = guarded
    try:
        yield
    finally:
        socket.socket.connect = real_connect


@pytest.fixture(scope="session")
def session_start() -> float:
    return SESSION_START


@pytest.fixture(scope="session")
def repo_root() -> Path:
    return REPO_ROOT


@pytest.fixture(scope="session")
def fixtures_dir(repo_root) -> Path:
    return repo_root / "fixtures"


@pytest.fixture(scope="session")
def onto():
    return load_bundled_ontology()


@pytest.fixture(scope="session")
def ns(onto) -> str:
    return onto.default_namespace


@pytest.fixture(scope="session")
def iri(ns):
    def make(local: str) -> Iri:
        return Iri(ns, local)

    return make


@pytest.fixture(scope="session")
def roots(iri) -> VocabularyRoots:
    return VocabularyRoots(
        color=iri("ColorAbnormality"),
        symptom=iri("SymptomAbnormality"),
        shape=iri("ShapeOfSymptomAbnormality"),
        plant_part=iri("PlantPart"),
    )


@pytest.fixture(scope="session")
def vocab(onto, roots):
    return extract_vocabulary(onto, roots)


@pytest.fixture(scope="session")
def rice_prompt(vocab):
    return build_prompt("rice leaf", vocab)
