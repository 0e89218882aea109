"""Primary harness driving the adapter service over real HTTP.

Exercises the full cross-component loop: index build with the adapter's
embed_text endpoint, experiment cells transcribed through /v1/generate,
and pseudo-labeling through /v1/transcribe. Skipped when the adapter
build output is missing.
"""

from __future__ import annotations

import base64
import json
import shutil
import socket
import subprocess
import time
import urllib.request
from pathlib import Path

import numpy as np
import pytest

from ticl.harness.backends import HttpAdapterBackend, post_adapter_request
from ticl.harness.config import load_config
from ticl.harness.embedders import AdapterTextEmbedder, hash_ngram_embed
from ticl.harness.runner import run_experiment

from conftest import make_twin_corpus, write_experiment_config, write_pseudo_label_file

ADAPTERS_DIR = Path(__file__).resolve().parent.parent / "adapters"
CLI_JS = ADAPTERS_DIR / "dist" / "cli.js"

pytestmark = pytest.mark.skipif(
    shutil.which("node") is None or not CLI_JS.exists(),
    reason="adapter package not built (run npm install && npm run build in adapters/)",
)


@pytest.fixture(scope="module")
def adapter_service():
    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    process = subprocess.Popen(
        ["node", str(CLI_JS), "serve", "--port", str(port)],
        stdout=subprocess.PIPE, stderr=subprocess.STDOUT,
    )
    base_url = f"http://127.0.0.1:{port}"
    try:
        for _ in range(100):
            try:
                with urllib.request.urlopen(f"{base_url}/v1/health", timeout=2) as response:
                    if json.loads(response.read())["status"] == "ok":
                        break
            except OSError:
                time.sleep(0.1)
        else:
            raise RuntimeError("adapter service did not come up")
        yield base_url
    finally:
        process.terminate()
        process.wait(timeout=10)


def test_adapter_embedder_matches_builtin(adapter_service):
    embedder = AdapterTextEmbedder(adapter_service, "hash-ngram")
    remote = embedder("the same sentence twice")
    local = hash_ngram_embed("the same sentence twice")
    assert np.array_equal(remote, local.astype(np.float32).astype(np.float64))


def test_run_experiment_against_live_adapter(tmp_path, adapter_service):
    corpus = make_twin_corpus(tmp_path, n_test=6, n_pool=15, seed=88)
    labels = write_pseudo_label_file(
        tmp_path / "labels.jsonl", corpus["transcripts"], "oracle")
    config_path = write_experiment_config(
        tmp_path / "exp.cfg", corpus["pool_manifest"], corpus["test_manifest"], labels,
        k_values="1,2",
    )
    config = load_config(config_path)
    backend = HttpAdapterBackend(adapter_service, model_id="echo-nearest")
    manifest = run_experiment(config, tmp_path / "work", backend=backend)
    for cell in manifest.cells.values():
        assert cell.status == "ok", cell.cause
        assert cell.metrics.error_rate == 0.0


def test_transcribe_endpoint_supplies_pseudo_labels(adapter_service, tmp_path):
    audio = base64.b64encode("words hiding in audio bytes".encode("utf-8")).decode("ascii")
    response = post_adapter_request(f"{adapter_service}/v1/transcribe", {
        "kind": "transcribe", "model_id": "utf8-echo",
        "payload": {"audio_b64": audio}, "request_id": "t1",
    })
    assert response["text"] == "words hiding in audio bytes"
