"""Transcription backends: the echo-nearest mock and the HTTP adapter client.

The mock is the harness's test oracle. Given a request built from a
k>=1 context it returns the rank-1 retrieved transcript; at k=0 it
falls back to echoing the pseudo-label. Both behaviors are analytically
predictable, which makes full-pipeline expectations derivable without
any model.
"""

from __future__ import annotations

import json
import uuid
from concurrent.futures import ThreadPoolExecutor
from typing import Mapping, Protocol

import requests

from ..context import BackendRequest, ORDER_NEAREST_LAST, check_interleaving
from ..errors import AdapterProtocolError, BackendUnavailable
from ..selection import PseudoLabel

MOCK_ECHO_NEAREST = "mock:echo-nearest"

DEFAULT_MAX_IN_FLIGHT = 4


class Backend(Protocol):
    name: str

    def transcribe(self, request: BackendRequest) -> str: ...


class EchoNearestBackend:
    """Model-free stand-in LMM.

    Returns the transcript of the retrieval rank-1 example (the
    assistant turn adjacent to the test query under nearest_last,
    the first assistant turn otherwise); with no examples it echoes
    the pseudo-label for the request's test utterance.
    """

    name = MOCK_ECHO_NEAREST

    def __init__(self, pseudo_labels: Mapping[str, PseudoLabel] | None = None):
        self._pseudo_labels = dict(pseudo_labels or {})

    def transcribe(self, request: BackendRequest) -> str:
        check_interleaving(list(request.turns))
        assistant_texts = [t["text"] for t in request.turns if t["role"] == "assistant"]
        if assistant_texts:
            policy = request.metadata.get("order_policy", ORDER_NEAREST_LAST)
            return assistant_texts[-1] if policy == ORDER_NEAREST_LAST else assistant_texts[0]
        label = self._pseudo_labels.get(request.metadata.get("test_id", ""))
        return label.text if label is not None else ""


def post_adapter_request(url: str, body: dict, timeout_s: float = 120.0) -> dict:
    """POST one adapter-protocol request and validate the response envelope."""
    try:
        http_response = requests.post(url, json=body, timeout=timeout_s)
    except requests.RequestException as exc:
        raise BackendUnavailable(f"{url}: {exc}")
    try:
        payload = http_response.json()
    except (ValueError, json.JSONDecodeError):
        raise AdapterProtocolError(f"non-JSON response from {url} (HTTP {http_response.status_code})")
    if payload.get("request_id") != body.get("request_id"):
        raise AdapterProtocolError(
            f"request_id mismatch: sent {body.get('request_id')!r}, got {payload.get('request_id')!r}"
        )
    if payload.get("status") != "ok":
        raise AdapterProtocolError(str(payload.get("error_detail", "unknown adapter error")))
    return payload


class HttpAdapterBackend:
    """LMM generation over the adapter wire protocol (/v1/generate).

    Audio stays referenced inside contexts; base64 inlining happens
    here, at the adapter boundary, for every turn whose audio file is
    readable.
    """

    def __init__(self, base_url: str, model_id: str, timeout_s: float = 300.0,
                 inline_audio: bool = True):
        self.base_url = base_url.rstrip("/")
        self.model_id = model_id
        self.timeout_s = timeout_s
        self.inline_audio = inline_audio
        self.name = f"adapter:{self.base_url}#{model_id}"

    def _inline_audio(self, payload: dict) -> dict:
        import base64
        from pathlib import Path

        for turn in payload.get("turns", []):
            audio_path = turn.get("audio_path")
            if audio_path and "audio_b64" not in turn and Path(audio_path).is_file():
                turn["audio_b64"] = base64.b64encode(Path(audio_path).read_bytes()).decode("ascii")
        return payload

    def transcribe(self, request: BackendRequest) -> str:
        payload = request.to_payload()
        if self.inline_audio:
            payload = self._inline_audio(payload)
        body = {
            "kind": "generate",
            "model_id": self.model_id or request.model,
            "payload": payload,
            "request_id": uuid.uuid4().hex,
        }
        response = post_adapter_request(f"{self.base_url}/v1/generate", body, self.timeout_s)
        text = response.get("text")
        if text is None:
            raise AdapterProtocolError("generate response carried no text")
        return str(text)

    def health(self) -> dict:
        try:
            http_response = requests.get(f"{self.base_url}/v1/health", timeout=10.0)
            return http_response.json()
        except (requests.RequestException, ValueError) as exc:
            raise BackendUnavailable(f"{self.base_url}/v1/health: {exc}")


def make_backend(spec: str, pseudo_labels: Mapping[str, PseudoLabel] | None = None,
                 model_id: str = "") -> Backend:
    """Resolve a backend spec: "mock:echo-nearest" or an adapter base URL."""
    if spec == MOCK_ECHO_NEAREST:
        return EchoNearestBackend(pseudo_labels)
    if spec.startswith("http://") or spec.startswith("https://"):
        return HttpAdapterBackend(spec, model_id=model_id)
    raise ValueError(f"unknown backend spec {spec!r}")


class BoundedDispatcher:
    """Fan transcription requests out with a cap on in-flight calls.

    LMM backends are the bottleneck; unbounded fan-out only builds
    queues. Results come back keyed by test id, so completion order
    never affects downstream artifacts.
    """

    def __init__(self, backend: Backend, max_in_flight: int = DEFAULT_MAX_IN_FLIGHT):
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        self.backend = backend
        self.max_in_flight = max_in_flight

    def transcribe_all(self, requests_by_id: Mapping[str, BackendRequest]) -> dict[str, str]:
        items = list(requests_by_id.items())
        if not items:
            return {}
        if self.max_in_flight == 1 or len(items) == 1:
            return {test_id: self.backend.transcribe(req) for test_id, req in items}
        with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
            futures = {test_id: pool.submit(self.backend.transcribe, req) for test_id, req in items}
            return {test_id: future.result() for test_id, future in futures.items()}
