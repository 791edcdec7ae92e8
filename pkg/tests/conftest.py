import json
from pathlib import Path

import pytest

from bioace.config import CAPABILITIES, EndpointConfig
from bioace.corpus import load_corpus
from bioace.gateway import ModelGateway

FIXTURES = Path(__file__).parent / "fixtures"


def pytest_runtest_logreport(report):
    """One visible pass/fail line per acceptance criterion."""
    if report.when != "call" or "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    outcome = "PASS" if report.passed else "FAIL"
    print(f"\n[acceptance] {name}: {outcome}", flush=True)


@pytest.fixture
def corpus_dir() -> Path:
    return FIXTURES / "corpus"


@pytest.fixture
def corpus(corpus_dir):
    return load_corpus(corpus_dir)


@pytest.fixture
def gateway_fixture_path() -> Path:
    return FIXTURES / "gateway.json"


def endpoints_for(fixture_path: Path) -> dict[str, EndpointConfig]:
    url = f"fixture:{fixture_path}"
    return {
        capability: EndpointConfig(
            base_url=url, model_id=f"fixture-{capability}", capability=capability
        )
        for capability in CAPABILITIES
    }


@pytest.fixture
def fixture_endpoints(gateway_fixture_path):
    return endpoints_for(gateway_fixture_path)


@pytest.fixture
def gateway(tmp_path):
    # No real sleeping in tests even if something retries.
    return ModelGateway(cache_dir=tmp_path / "cache", sleep=lambda _s: None)


@pytest.fixture
def memory_gateway():
    return ModelGateway(cache_dir=None, sleep=lambda _s: None)


@pytest.fixture
def write_gateway_fixture(tmp_path):
    """Write a test-local canned-response file; returns its path."""

    counter = {"n": 0}

    def _write(spec: dict) -> Path:
        counter["n"] += 1
        path = tmp_path / f"gateway-{counter['n']}.json"
        path.write_text(json.dumps(spec), encoding="utf-8")
        return path

    return _write


@pytest.fixture
def config_file(tmp_path, gateway_fixture_path):
    """Gateway config pointing every capability at the shared fixture file."""
    config = {
        "endpoints": {
            capability: {
                "base_url": f"fixture:{gateway_fixture_path}",
                "model_id": f"fixture-{capability}",
            }
            for capability in CAPABILITIES
        }
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config), encoding="utf-8")
    return path
