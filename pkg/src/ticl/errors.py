"""Exception types shared across the toolkit."""

from __future__ import annotations


class TiclError(Exception):
    """Base class for all toolkit errors."""


class MalformedManifest(TiclError):
    def __init__(self, line_no: int, detail: str):
        super().__init__(f"manifest line {line_no}: {detail}")
        self.line_no = line_no
        self.detail = detail


class MissingField(TiclError):
    def __init__(self, name: str, line_no: int):
        super().__init__(f"manifest line {line_no}: missing field {name!r}")
        self.name = name
        self.line_no = line_no


class DuplicateId(TiclError):
    def __init__(self, record_id: str):
        super().__init__(f"duplicate record id {record_id!r}")
        self.record_id = record_id


class InvalidRange(TiclError):
    pass


class ZeroVector(TiclError):
    def __init__(self, record_id: str | None = None):
        detail = f" for id {record_id!r}" if record_id else ""
        super().__init__(f"cannot normalize a (near-)zero vector{detail}")
        self.record_id = record_id


class EmptySequence(TiclError):
    pass


class MissingEmbedding(TiclError):
    def __init__(self, record_id: str):
        super().__init__(f"no embedding for pool id {record_id!r}")
        self.record_id = record_id


class DimensionMismatch(TiclError):
    def __init__(self, expected: int, got: int, record_id: str | None = None):
        where = f" (id {record_id!r})" if record_id else ""
        super().__init__(f"expected dim {expected}, got {got}{where}")
        self.expected = expected
        self.got = got
        self.record_id = record_id


class EmptyIndex(TiclError):
    pass


class EmbeddingFileError(TiclError):
    pass


class SelectionFailed(TiclError):
    def __init__(self, test_id: str, cause: Exception):
        super().__init__(f"selection failed for {test_id!r}: {cause}")
        self.test_id = test_id
        self.cause = cause


class UnresolvedId(TiclError):
    def __init__(self, record_id: str):
        super().__init__(f"neighbor id {record_id!r} not found in pool")
        self.record_id = record_id


class MissingAudio(TiclError):
    def __init__(self, path: str):
        super().__init__(f"audio file not found: {path}")
        self.path = path


class TemplateError(TiclError):
    pass


class EmptyReferenceCorpus(TiclError):
    pass


class ZeroBaseline(TiclError):
    pass


class ConfigError(TiclError):
    pass


class BackendUnavailable(TiclError):
    pass


class AdapterProtocolError(TiclError):
    def __init__(self, detail: str):
        super().__init__(f"adapter protocol error: {detail}")
        self.detail = detail
