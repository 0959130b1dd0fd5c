"""
Test lifecycle management for experiment runs.
"""

import hashlib
import json

import pytest

from coupled_mkv import __version__
from coupled_mkv.lifecycle import MANIFEST_NAME, experiment_context, file_sha256

# Mark all tests in this file as unit tests
pytestmark = pytest.mark.unit


@pytest.fixture
def spec():
    """A resolved experiment spec as echoed into the manifest."""
    return {"kind": "simulate", "seed": 11, "params": {"N": 10}}


def test_file_sha256(tmp_path):
    """Test hashing a file in chunks."""
    path = tmp_path / "data.bin"
    payload = b"0123456789" * 10_000
    path.write_bytes(payload)
    assert file_sha256(path) == hashlib.sha256(payload).hexdigest()


def test_context_normal_exit_writes_manifest(tmp_path, spec):
    """Test that a clean exit writes the manifest with spec, version and file hashes."""
    out = tmp_path / "run"
    with experiment_context(spec, out, workers=2) as context:
        assert out.is_dir()
        assert context.workers == 2
        csv_path = context.write_csv("table.csv", ["t", "value"], [[0.0, 1.5], [0.5, 2]])
        json_path = context.write_json("result.json", {"b": 1, "a": [1.0, 2.0]})

    manifest = json.loads((out / MANIFEST_NAME).read_text())
    assert manifest["spec"] == spec
    assert manifest["version"] == __version__
    assert manifest["files"] == {
        "result.json": file_sha256(json_path),
        "table.csv": file_sha256(csv_path),
    }
    assert csv_path.read_text() == "t,value\n0,1.5\n0.5,2\n"


def test_context_error_exit_skips_manifest(tmp_path, spec):
    """Test that an exception propagates and leaves no manifest behind."""
    out = tmp_path / "run"
    with pytest.raises(RuntimeError, match="boom"):
        with experiment_context(spec, out, workers=1) as context:
            context.write_json("partial.json", {})
            raise RuntimeError("boom")

    assert (out / "partial.json").exists()
    assert not (out / MANIFEST_NAME).exists()


def test_context_shuts_down_executor(tmp_path, spec):
    """Test that the worker pool accepts work inside the context and none after it."""
    with experiment_context(spec, tmp_path, workers=2) as context:
        executor = context.executor
        assert executor.submit(lambda: 21 * 2).result() == 42

    with pytest.raises(RuntimeError):
        executor.submit(lambda: None)


def test_record_registers_external_files(tmp_path, spec):
    """Test that files written by other means can be added to the manifest."""
    with experiment_context(spec, tmp_path, workers=1) as context:
        path = context.path("notes.txt")
        path.write_text("hello\n")
        context.record(path)

    manifest = json.loads((tmp_path / MANIFEST_NAME).read_text())
    assert list(manifest["files"]) == ["notes.txt"]
