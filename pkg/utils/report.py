"""Machine-readable run report written to ``<out>/report.yaml``."""
import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List

import yaml
from jsonschema import Draft202012Validator

from utils.errors import ReportSchemaError, VerdadError
from utils.logger import logger

SCHEMA_PATH = Path(__file__).with_name("report_schema.json")


@lru_cache(maxsize=1)
def _validator() -> Draft202012Validator:
    with open(SCHEMA_PATH, "r", encoding="utf-8") as f:
        return Draft202012Validator(json.load(f))


@dataclass
class RunReport:
    """Accumulates errors, warnings and per-unit results for one command."""
    command: str
    errors: List[Dict[str, Any]] = field(default_factory=list)
    warnings: List[Dict[str, Any]] = field(default_factory=list)
    templates: List[Dict[str, Any]] = field(default_factory=list)
    bundles: List[Dict[str, Any]] = field(default_factory=list)
    precedence_overrides: List[Dict[str, Any]] = field(default_factory=list)
    annotations_unresolved: List[Dict[str, Any]] = field(default_factory=list)
    skipped_files: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def error(self, exc: VerdadError, **extra: Any) -> None:
        entry = exc.to_report()
        entry.update({k: v for k, v in extra.items() if v is not None})
        # later passes of one run may rediscover the same problem
        if entry in self.errors:
            return
        self.errors.append(entry)
        logger.error(exc.message)

    def warning(self, kind: str, message: str, **details: Any) -> None:
        entry = {"kind": kind, "message": message}
        entry.update({k: v for k, v in details.items() if v is not None})
        if entry in self.warnings:
            return
        self.warnings.append(entry)
        logger.warning(message)

    def skip(self, relative_path: str) -> None:
        if relative_path in self.skipped_files:
            return
        self.skipped_files.append(relative_path)
        logger.debug(f"Skipping opaque file {relative_path}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "ok": self.ok,
            "errors": self.errors,
            "warnings": self.warnings,
            "templates": self.templates,
            "bundles": self.bundles,
            "precedence_overrides": self.precedence_overrides,
            "annotations_unresolved": self.annotations_unresolved,
            "skipped_files": self.skipped_files,
        }

    def validate(self) -> Dict[str, Any]:
        data = self.to_dict()
        problems = sorted(_validator().iter_errors(data), key=lambda e: list(e.path))
        if problems:
            first = problems[0]
            where = "/".join(str(p) for p in first.path) or "<root>"
            raise ReportSchemaError(f"run report violates schema at {where}: {first.message}")
        return data

    def write(self, out_dir: Path) -> Path:
        data = self.validate()
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "report.yaml"
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            yaml.safe_dump(data, f, sort_keys=False, allow_unicode=True)
        logger.info(f"Report written to {path}")
        return path

    def to_json(self) -> str:
        return json.dumps(self.validate(), indent=2, ensure_ascii=False)


__all__ = ["RunReport"]
