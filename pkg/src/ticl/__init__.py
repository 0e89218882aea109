"""Semantic KNN selection of in-context examples for speech recognition.

The package covers the full retrieval-augmented transcription loop:
candidate pool ingestion, embedding index construction and exact KNN
queries, example selection strategies, dialogue-style context assembly,
WER/CER scoring, and a deterministic experiment harness with a
model-free mock backend for desk-scale runs.
"""

from __future__ import annotations

__version__ = "0.1.0"
