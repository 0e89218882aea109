"""Dialogue-style context assembly for speech in-context learning.

A context is a sequence of (prompt, audio, transcript) demonstration
turns followed by the test query. Serialization always interleaves:
each example becomes a user turn (prompt + audio reference) and an
assistant turn (transcript). Block-concatenating all audio before all
text is deliberately unrepresentable here; that shape makes multimodal
models hallucinate badly.

Audio is carried by reference. Base64 inlining happens only when a
request is serialized for a real adapter, keeping contexts lightweight
and diffable.
"""

from __future__ import annotations

import base64
import json
import string
from dataclasses import dataclass, field
from pathlib import Path

from .errors import MissingAudio, TemplateError, UnresolvedId
from .pool import CandidatePool
from .selection import SelectionResult

ORDER_NEAREST_LAST = "nearest_last"
ORDER_NEAREST_FIRST = "nearest_first"
ORDER_AS_RETRIEVED = "as_retrieved"

ORDER_POLICIES = (ORDER_NEAREST_LAST, ORDER_NEAREST_FIRST, ORDER_AS_RETRIEVED)

DEFAULT_TEMPLATE_TEXT = "Transcribe the {language} speech audio exactly. Reply with the transcript only."


@dataclass(frozen=True)
class PromptTemplate:
    """Instruction text with named {placeholder} slots."""

    instruction_text: str
    language: str = "und"

    @property
    def placeholders(self) -> tuple[str, ...]:
        names = []
        for _, name, _, _ in string.Formatter().parse(self.instruction_text):
            if name:
                names.append(name)
        return tuple(dict.fromkeys(names))

    def render(self, **slots: str) -> str:
        values = {"language": self.language, **slots}
        missing = [name for name in self.placeholders if name not in values]
        if missing:
            raise TemplateError(f"unbound template slots: {missing}")
        rendered = self.instruction_text.format(**values)
        if not rendered.strip():
            raise TemplateError("template rendered to empty text")
        return rendered

    @classmethod
    def load(cls, path: str | Path, language: str = "und") -> "PromptTemplate":
        text = Path(path).read_text(encoding="utf-8").strip()
        if not text:
            raise TemplateError(f"empty template file: {path}")
        return cls(instruction_text=text, language=language)


@dataclass(frozen=True)
class ContextExample:
    prompt: str
    audio_ref: str
    answer_text: str
    source_id: str


@dataclass(frozen=True)
class Context:
    examples: tuple[ContextExample, ...]
    test_prompt: str
    test_audio_ref: str
    order_policy: str
    test_id: str = ""

    @property
    def k(self) -> int:
        return len(self.examples)


def build_context(
    selection: SelectionResult,
    pool: CandidatePool,
    template: PromptTemplate,
    test_audio: str,
    order_policy: str = ORDER_NEAREST_LAST,
    audio_root: str | Path | None = None,
) -> Context:
    """Resolve selected neighbors against the pool and order them.

    nearest_last puts rank 1 adjacent to the test query (recency bias in
    decoder-only models makes the most similar example most influential
    there); nearest_first and as_retrieved keep rank order. When
    audio_root is given, audio paths are resolved against it and must
    exist.
    """
    if order_policy not in ORDER_POLICIES:
        raise ValueError(f"unknown order policy {order_policy!r}")

    def resolve_audio(rel_path: str) -> str:
        if audio_root is None:
            return rel_path
        full = Path(audio_root) / rel_path
        if not full.exists():
            raise MissingAudio(str(full))
        return str(full)

    prompt = template.render()
    examples: list[ContextExample] = []
    for neighbor in selection.neighbors:
        record = pool.get(neighbor.id)
        if record is None:
            raise UnresolvedId(neighbor.id)
        examples.append(ContextExample(
            prompt=prompt,
            audio_ref=resolve_audio(record.audio_path),
            answer_text=record.transcript,
            source_id=record.id,
        ))
    if order_policy == ORDER_NEAREST_LAST:
        examples.reverse()

    return Context(
        examples=tuple(examples),
        test_prompt=prompt,
        test_audio_ref=resolve_audio(test_audio),
        order_policy=order_policy,
        test_id=selection.test_id,
    )


@dataclass(frozen=True)
class BackendRequest:
    """Wire-format request: strictly alternating turns ending on the test query."""

    model: str
    turns: tuple[dict, ...]
    decode_params: dict
    metadata: dict = field(default_factory=dict)

    def to_payload(self) -> dict:
        return {
            "model": self.model,
            "turns": [dict(t) for t in self.turns],
            "decode_params": dict(self.decode_params),
            "metadata": dict(self.metadata),
        }

    def to_bytes(self) -> bytes:
        return json.dumps(
            self.to_payload(), sort_keys=True, ensure_ascii=False, separators=(",", ":")
        ).encode("utf-8")


def serialize_context(
    context: Context,
    model: str = "",
    max_new_tokens: int = 256,
    inline_audio: bool = False,
) -> BackendRequest:
    """Emit the 2k+1 alternating turns for a k-example context.

    Each example yields a user turn (prompt text + audio) then an
    assistant turn (verbatim transcript); the final user turn carries
    the test prompt and test audio. Greedy decoding (temperature 0) is
    pinned for reproducibility. Identical inputs produce byte-identical
    payloads via to_bytes().
    """
    turns: list[dict] = []
    for example in context.examples:
        user: dict = {"role": "user", "text": example.prompt, "audio_path": example.audio_ref}
        if inline_audio:
            user["audio_b64"] = _read_audio_b64(example.audio_ref)
        turns.append(user)
        turns.append({"role": "assistant", "text": example.answer_text})
    final: dict = {"role": "user", "text": context.test_prompt, "audio_path": context.test_audio_ref}
    if inline_audio:
        final["audio_b64"] = _read_audio_b64(context.test_audio_ref)
    turns.append(final)

    return BackendRequest(
        model=model,
        turns=tuple(turns),
        decode_params={"max_new_tokens": max_new_tokens, "temperature": 0},
        metadata={
            "test_id": context.test_id,
            "k": context.k,
            "order_policy": context.order_policy,
        },
    )


def _read_audio_b64(path: str) -> str:
    p = Path(path)
    if not p.exists():
        raise MissingAudio(path)
    return base64.b64encode(p.read_bytes()).decode("ascii")


def turn_has_audio(turn: dict) -> bool:
    return "audio_path" in turn or "audio_b64" in turn


def check_interleaving(turns: list[dict] | tuple[dict, ...]) -> None:
    """Reject turn sequences where two audio-bearing turns are adjacent.

    This is the shape guard: demonstrations must alternate user/assistant
    so no audio segment directly follows another without an intervening
    transcript turn.
    """
    for prev, cur in zip(turns, turns[1:]):
        if turn_has_audio(prev) and turn_has_audio(cur):
            raise ValueError("adjacent audio turns: context must interleave audio and transcripts")
    if not turns:
        raise ValueError("request has no turns")
    if turns[-1]["role"] != "user":
        raise ValueError("request must end with the test query user turn")
