"""Exception hierarchy shared by every verdad package.

Each error keeps its structured fields in ``details`` so the run report can
record it without re-parsing the message.
"""
from typing import Any, Dict, Iterable, Optional


class VerdadError(Exception):
    """Base class for all errors raised by verdad operations."""

    def __init__(self, message: str, **details: Any) -> None:
        super().__init__(message)
        self.message = message
        self.details = {k: v for k, v in details.items() if v is not None}

    def to_report(self) -> Dict[str, Any]:
        entry: Dict[str, Any] = {"kind": type(self).__name__, "message": self.message}
        for key, value in self.details.items():
            entry[key] = value if isinstance(value, (int, float, bool, list)) else str(value)
        return entry


# ========== datamodel ==========

class UnitError(VerdadError):
    pass


class UnknownUnitSymbol(UnitError):
    def __init__(self, text: str, start: int, end: int) -> None:
        symbol = text[start:end]
        super().__init__(
            f"unknown unit symbol '{symbol}' in '{text}' (columns {start}-{end})",
            text=text, symbol=symbol, start=start, end=end,
        )
        self.symbol = symbol
        self.span = (start, end)


class MalformedExpression(UnitError):
    def __init__(self, text: str, position: Optional[int] = None, reason: str = "malformed unit expression") -> None:
        where = f" at column {position}" if position is not None else ""
        super().__init__(f"{reason}{where}: '{text}'", text=text, position=position)


class DimensionMismatch(UnitError):
    def __init__(self, source: Any, target: Any) -> None:
        super().__init__(
            f"cannot convert '{source}' to '{target}': incompatible physical dimensions",
            source=source, target=target,
        )


class TimeError(VerdadError):
    pass


class EpochOutOfLeapTable(TimeError):
    pass


class InvalidCalendarDate(TimeError):
    pass


class InvalidLeapSecond(TimeError):
    pass


class InvalidValue(VerdadError):
    """A value violates a datamodel invariant (bad map key, ragged table, NaN...)."""


# ========== ingest ==========

class ParseError(VerdadError):
    def __init__(self, fmt: Any, source: str, message: str,
                 line: Optional[int] = None, column: Optional[int] = None) -> None:
        where = source
        if line is not None:
            where += f":{line}"
            if column is not None:
                where += f":{column}"
        super().__init__(f"{fmt} parse error in {where}: {message}",
                         format=fmt, path=source, line=line, column=column)
        self.line = line
        self.column = column


class EncodingError(ParseError):
    pass


class CoercionError(VerdadError):
    pass


class NamespaceError(VerdadError):
    pass


class NamespaceCollision(NamespaceError):
    def __init__(self, key: Any, path1: str, path2: str) -> None:
        super().__init__(f"namespace collision at '{key}': {path1} and {path2}",
                         key=key, path=path1, other_path=path2)


class InvalidKeySegment(NamespaceError):
    pass


# ========== store ==========

class StoreError(VerdadError):
    pass


class CollisionWithinCommit(StoreError):
    def __init__(self, key: Any) -> None:
        super().__init__(f"key '{key}' appears more than once in one commit", key=key)


class KeyCollision(StoreError):
    def __init__(self, key: Any, source: str, existing_key: Any, existing_source: str, origin: Any) -> None:
        super().__init__(f"key '{key}' from {source} overlaps '{existing_key}' from {existing_source}, "
                         f"already stored with the same origin ({origin})",
                         key=key, path=source, other_key=existing_key, other_path=existing_source)


class NotFound(StoreError, KeyError):
    def __init__(self, key: Any, nearest: str = "") -> None:
        VerdadError.__init__(self, f"key '{key}' not found (nearest resolvable prefix: '{nearest}')",
                             key=key, nearest=nearest)
        self.key = key
        self.nearest = nearest

    def __str__(self) -> str:
        return self.message


# ========== template ==========

class TemplateError(VerdadError):
    pass


class TemplateSyntaxError(TemplateError):
    def __init__(self, source: str, message: str, line: Optional[int] = None, column: Optional[int] = None) -> None:
        super().__init__(f"template syntax error in {source}"
                         + (f" line {line}" if line is not None else "") + f": {message}",
                         path=source, line=line, column=column)


class RenderError(TemplateError):
    def __init__(self, source: str, cause: Any) -> None:
        super().__init__(f"failed to render {source}: {cause}", path=source,
                         cause=type(cause).__name__ if isinstance(cause, Exception) else None)
        self.cause = cause


class OutputCollision(TemplateError):
    def __init__(self, output: str, sources: Iterable[str], existing: bool = False) -> None:
        sources = list(sources)
        if existing:
            message = (f"template {', '.join(sources)} would overwrite {output}, which holds data "
                       "no render wrote; move the file or rename the template")
        else:
            message = f"templates {', '.join(sources)} all render to {output}"
        super().__init__(message, path=output, sources=sources)


class MissingKey(TemplateError):
    def __init__(self, source: str, keys: Iterable[Any]) -> None:
        keys = sorted(str(k) for k in keys)
        super().__init__(f"template {source} references missing keys: {', '.join(keys)}", path=source, keys=keys)
        self.keys = keys


class DynamicLookup(TemplateError):
    def __init__(self, source: str, base: str, line: Optional[int] = None) -> None:
        super().__init__(f"template {source} builds a key at render time under '{base or '<context>'}'; "
                         "its dependencies cannot be checked statically", path=source, base=base, line=line)


# ========== analysis ==========

class AnalysisError(VerdadError):
    pass


class ManifestMissing(AnalysisError):
    def __init__(self, bundle_path: str) -> None:
        super().__init__(f"analysis bundle {bundle_path} has no manifest.yaml", path=bundle_path)


class ManifestInvalid(AnalysisError):
    def __init__(self, bundle_path: str, field: str, reason: str) -> None:
        super().__init__(f"invalid manifest in {bundle_path}: field '{field}' {reason}",
                         path=bundle_path, field=field)


class DuplicateBundleName(AnalysisError):
    def __init__(self, name: str, paths: Iterable[str]) -> None:
        paths = list(paths)
        super().__init__(f"bundle name '{name}' declared by {', '.join(paths)}", name=name, paths=paths)


class MissingInput(AnalysisError):
    def __init__(self, bundle: str, keys: Iterable[Any]) -> None:
        keys = sorted(str(k) for k in keys)
        super().__init__(f"bundle '{bundle}' is missing inputs: {', '.join(keys)}", bundle=bundle, keys=keys)
        self.keys = keys


class RuntimeProbeFailed(AnalysisError):
    pass


class MissingOutputs(AnalysisError):
    def __init__(self, bundle: str, paths: Iterable[str]) -> None:
        paths = list(paths)
        super().__init__(f"bundle '{bundle}' exited cleanly but did not produce: {', '.join(paths)}",
                         bundle=bundle, paths=paths)


class BundleExecutionFailed(AnalysisError):
    def __init__(self, bundle: str, reason: str, log: Optional[str] = None) -> None:
        super().__init__(f"bundle '{bundle}' failed: {reason}", bundle=bundle, log=log)


class BundleNotExecuted(AnalysisError):
    pass


class DependencyCycle(AnalysisError):
    def __init__(self, names: Iterable[str]) -> None:
        names = list(names)
        super().__init__(f"analysis bundles form a dependency cycle: {' -> '.join(names)}", names=names)


# ========== cli ==========

class CommandError(VerdadError):
    pass


class TargetExists(CommandError):
    pass


class TargetUnresolvable(CommandError):
    pass


class ReportSchemaError(CommandError):
    pass
