from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from paravid.providers import ProviderConfig, ProviderGateway
from support import make_store


@pytest.fixture
def stub_config(tmp_path):
    return ProviderConfig(mode="stub", stub_seed=7, cache_dir=tmp_path / "cache", stub_dim=8)


@pytest.fixture
def gateway(stub_config):
    return ProviderGateway(stub_config)


@pytest.fixture
def toy_store(tmp_path):
    rows = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]]
    return make_store(tmp_path, rows, ["va", "vb", "vc"])
