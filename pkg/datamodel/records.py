"""Key paths, provenance and annotation records."""
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Tuple, Union

from datamodel.timescales import Epoch, TimeScale
from utils.errors import InvalidKeySegment, InvalidValue

SEPARATOR = "."


def validate_segment(segment: str) -> str:
    if not isinstance(segment, str) or not segment:
        raise InvalidKeySegment(f"key segments must be non-empty text, got {segment!r}")
    if SEPARATOR in segment:
        raise InvalidKeySegment(f"key segment '{segment}' contains the reserved separator '.'")
    return segment


@dataclass(frozen=True, order=True)
class KeyPath:
    segments: Tuple[str, ...]

    def __post_init__(self):
        segments = tuple(self.segments)
        if not segments:
            raise InvalidKeySegment("a key path needs at least one segment")
        for segment in segments:
            validate_segment(segment)
        object.__setattr__(self, "segments", segments)

    @classmethod
    def parse(cls, text: Union[str, "KeyPath"]) -> "KeyPath":
        if isinstance(text, KeyPath):
            return text
        return cls(tuple(text.split(SEPARATOR)))

    @classmethod
    def of(cls, *segments: str) -> "KeyPath":
        return cls(tuple(segments))

    def child(self, *segments: str) -> "KeyPath":
        return KeyPath(self.segments + tuple(segments))

    def startswith(self, prefix: "KeyPath") -> bool:
        return self.segments[:len(prefix.segments)] == prefix.segments

    def relative_to(self, prefix: "KeyPath") -> Tuple[str, ...]:
        if not self.startswith(prefix):
            raise ValueError(f"'{self}' is not under '{prefix}'")
        return self.segments[len(prefix.segments):]

    def prefixes(self) -> Iterable["KeyPath"]:
        """All prefixes, longest first (the path itself included)."""
        for n in range(len(self.segments), 0, -1):
            yield KeyPath(self.segments[:n])

    @property
    def head(self) -> str:
        return self.segments[0]

    def __len__(self) -> int:
        return len(self.segments)

    def __str__(self) -> str:
        return SEPARATOR.join(self.segments)


def join_key(prefix: Optional[KeyPath], *segments: str) -> KeyPath:
    if prefix is None:
        return KeyPath(tuple(segments))
    return prefix.child(*segments) if segments else prefix


class SourceFormat(str, Enum):
    JSON = "JSON"
    YAML = "YAML"
    TOML = "TOML"
    RON = "RON"
    CSV = "CSV"
    XLSX = "XLSX"
    MARKDOWN = "MARKDOWN"


class OriginKind(str, Enum):
    USER_INPUT = "UserInput"
    ANALYSIS_OUTPUT = "AnalysisOutput"


@dataclass(frozen=True)
class Origin:
    kind: OriginKind
    bundle: Optional[str] = None

    @classmethod
    def user_input(cls) -> "Origin":
        return cls(OriginKind.USER_INPUT)

    @classmethod
    def analysis_output(cls, bundle: str) -> "Origin":
        return cls(OriginKind.ANALYSIS_OUTPUT, bundle)

    @property
    def is_user_input(self) -> bool:
        return self.kind == OriginKind.USER_INPUT

    def __str__(self) -> str:
        return self.kind.value if self.bundle is None else f"{self.kind.value}({self.bundle})"


@dataclass(frozen=True)
class ProvenanceRecord:
    source_path: str
    format: Optional[SourceFormat]
    content_hash: str
    origin: Origin
    load_sequence: int


class AnnotationKind(str, Enum):
    COMMENT = "comment"
    QUESTION = "question"
    ISSUE = "issue"
    SUGGESTION = "suggestion"


@dataclass(frozen=True)
class AnnotationRecord:
    """A review note attached to a key; persisted in a sidecar file."""
    target: KeyPath
    kind: AnnotationKind
    author: str
    body: str
    timestamp: Epoch
    sidecar: Optional[str] = None

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", AnnotationKind(self.kind))
        except ValueError:
            raise InvalidValue(
                f"annotation kind must be one of {', '.join(k.value for k in AnnotationKind)}, got {self.kind!r}"
            ) from None
        if not isinstance(self.body, str) or not self.body.strip():
            raise InvalidValue("annotation body must be non-empty")
        if self.timestamp.scale != TimeScale.UTC:
            raise InvalidValue("annotation timestamps are UTC epochs")


__all__ = [
    "KeyPath",
    "join_key",
    "validate_segment",
    "SourceFormat",
    "Origin",
    "OriginKind",
    "ProvenanceRecord",
    "AnnotationKind",
    "AnnotationRecord",
]
