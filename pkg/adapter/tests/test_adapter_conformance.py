from __future__ import annotations

import copy
import json
from pathlib import Path

from click.testing import CliRunner

from paravid_adapter.cli import main
from paravid_adapter.conformance import check_vectors, config_from_vectors

VECTORS_FILE = Path(__file__).resolve().parents[2] / "conformance" / "stub_vectors.json"


def test_committed_file_passes(vectors_doc):
    report = check_vectors(vectors_doc)
    assert report.passed
    assert report.vectors_checked == len(vectors_doc["vectors"])


def test_config_read_from_file_header(vectors_doc):
    config = config_from_vectors(vectors_doc)
    assert config.mode == "stub"
    assert config.dim == vectors_doc["stub_dim"]


def test_mutated_response_fails_with_offset(vectors_doc):
    doc = copy.deepcopy(vectors_doc)
    original = doc["vectors"][0]["response"]
    doc["vectors"][0]["response"] = original[:10] + "X" + original[11:]
    report = check_vectors(doc)
    assert not report.passed
    assert len(report.mismatches) == 1
    m = report.mismatches[0]
    assert m.endpoint == doc["vectors"][0]["endpoint"]
    assert m.byte_offset == 10
    assert m.endpoint in report.summary()


def test_mutated_request_fails(vectors_doc):
    doc = copy.deepcopy(vectors_doc)
    doc["vectors"][0]["request"]["n"] = doc["vectors"][0]["request"]["n"] + 1
    assert not check_vectors(doc).passed


def test_missing_endpoint_named(vectors_doc):
    doc = copy.deepcopy(vectors_doc)
    doc["vectors"][0]["endpoint"] = "/v1/does-not-exist"
    report = check_vectors(doc)
    assert not report.passed
    assert "/v1/does-not-exist" in report.mismatches[0].detail


def test_wrong_seed_fails(vectors_doc):
    config = config_from_vectors(vectors_doc)
    from dataclasses import replace

    report = check_vectors(vectors_doc, replace(config, stub_seed=config.stub_seed + 1))
    # only the encode endpoints depend on the seed
    assert not report.passed
    assert all(m.endpoint.startswith("/v1/encode/") for m in report.mismatches)


def test_cli_pass_and_fail(tmp_path, vectors_doc):
    runner = CliRunner()
    result = runner.invoke(main, ["conformance-check", str(VECTORS_FILE)])
    assert result.exit_code == 0
    assert result.output.startswith("PASS")
    doc = copy.deepcopy(vectors_doc)
    doc["vectors"][0]["response"] = "{}"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    result = runner.invoke(main, ["conformance-check", str(bad)])
    assert result.exit_code == 1
    assert result.output.startswith("FAIL")
