"""Source format detection by file extension."""
from pathlib import PurePath
from typing import Optional, Union

from datamodel.records import SourceFormat

EXTENSIONS = {
    ".json": SourceFormat.JSON,
    ".yaml": SourceFormat.YAML,
    ".yml": SourceFormat.YAML,
    ".toml": SourceFormat.TOML,
    ".ron": SourceFormat.RON,
    ".csv": SourceFormat.CSV,
    ".xlsx": SourceFormat.XLSX,
    ".md": SourceFormat.MARKDOWN,
}

TEMPLATE_EXTENSIONS = (".j2", ".jinja")
ANALYSIS_SUFFIX = ".analysis"
SIDECAR_SUFFIX = ".annotations.yaml"


def detect_format(path: Union[str, PurePath]) -> Optional[SourceFormat]:
    """Return the format for ``path``, or None for opaque files."""
    suffix = PurePath(path).suffix.lower()
    return EXTENSIONS.get(suffix)


def is_template(path: Union[str, PurePath]) -> bool:
    return PurePath(path).suffix.lower() in TEMPLATE_EXTENSIONS


def is_sidecar(path: Union[str, PurePath]) -> bool:
    return PurePath(path).name.endswith(SIDECAR_SUFFIX)


def strip_template_extension(path: PurePath) -> PurePath:
    return path.with_suffix("") if is_template(path) else path


__all__ = [
    "EXTENSIONS",
    "TEMPLATE_EXTENSIONS",
    "ANALYSIS_SUFFIX",
    "SIDECAR_SUFFIX",
    "detect_format",
    "is_template",
    "is_sidecar",
    "strip_template_extension",
]
