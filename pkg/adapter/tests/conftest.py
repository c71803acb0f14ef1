from __future__ import annotations

import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from paravid_adapter.app import AdapterConfig, create_app

VECTORS_FILE = Path(__file__).resolve().parents[2] / "conformance" / "stub_vectors.json"


@pytest.fixture(scope="session")
def vectors_doc():
    return json.loads(VECTORS_FILE.read_text(encoding="utf-8"))


@pytest.fixture
def client():
    config = AdapterConfig(mode="stub", stub_seed=0, dim=8, concept_dim=4)
    return TestClient(create_app(config), raise_server_exceptions=False)
