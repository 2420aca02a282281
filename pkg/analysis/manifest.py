"""Analysis bundle discovery and ``manifest.yaml`` validation.

A bundle is any directory whose name ends in ``.analysis``::

    trajectory.analysis/
        manifest.yaml       # name, image, inputs, outputs, command
        config.yaml.j2      # rendered into the staging directory
        run.sh              # copied verbatim
"""
import os
import re
from dataclasses import dataclass
from pathlib import Path, PurePosixPath
from typing import Any, Dict, Iterable, List, Optional, Tuple

import yaml

from datamodel.records import KeyPath
from ingest.formats import ANALYSIS_SUFFIX
from ingest.namespace import key_for
from templating.discovery import TemplateUnit, discover_templates
from utils.config import DEFAULT_OUTPUT_DIR
from utils.errors import (DuplicateBundleName, InvalidKeySegment, ManifestInvalid, ManifestMissing,
                          VerdadError)
from utils.logger import logger

MANIFEST_NAME = "manifest.yaml"
NAME_PATTERN = re.compile(r"^[a-z0-9_-]+$")
KNOWN_FIELDS = frozenset(("name", "image", "inputs", "outputs", "command", "network", "timeout"))


@dataclass(frozen=True)
class AnalysisManifest:
    name: str
    image: str
    inputs: Tuple[KeyPath, ...]
    outputs: Tuple[str, ...]
    command: Optional[Tuple[str, ...]] = None
    network: bool = False
    timeout: Optional[float] = None
    path: Optional[Path] = None
    relative: str = ""

    def to_report(self) -> Dict[str, Any]:
        return {"name": self.name, "path": self.relative, "status": "Discovered"}


def _text_list(relative: str, field: str, raw: Any, required: bool) -> List[str]:
    if raw is None:
        if required:
            raise ManifestInvalid(relative, field, "is required")
        return []
    if not isinstance(raw, list) or not all(isinstance(item, str) and item for item in raw):
        raise ManifestInvalid(relative, field, "must be a list of non-empty strings")
    return raw


def _check_output(relative: str, output: str) -> str:
    path = PurePosixPath(output)
    if path.is_absolute() or ".." in path.parts or "\\" in output:
        raise ManifestInvalid(relative, "outputs", f"'{output}' must be a relative path inside the bundle")
    try:
        key_for(path.as_posix())
    except InvalidKeySegment as e:
        raise ManifestInvalid(relative, "outputs", f"'{output}' cannot be mounted: {e.message}") from None
    return path.as_posix()


def parse_manifest(data: Any, relative: str, path: Optional[Path] = None) -> AnalysisManifest:
    """Validate the loaded YAML of one manifest.

    Raises:
        ManifestInvalid: a field is missing, mistyped or unknown.
    """
    if not isinstance(data, dict):
        raise ManifestInvalid(relative, "<root>", "must be a mapping")
    unknown = sorted(set(data) - KNOWN_FIELDS)
    if unknown:
        raise ManifestInvalid(relative, unknown[0], "is not a manifest field")

    name = data.get("name")
    if not isinstance(name, str) or not NAME_PATTERN.match(name):
        raise ManifestInvalid(relative, "name", "must match [a-z0-9_-]+")
    image = data.get("image")
    if not isinstance(image, str) or not image.strip():
        raise ManifestInvalid(relative, "image", "must be a container image reference")

    inputs = []
    for text in _text_list(relative, "inputs", data.get("inputs"), required=False):
        try:
            inputs.append(KeyPath.parse(text))
        except InvalidKeySegment as e:
            raise ManifestInvalid(relative, "inputs", f"'{text}' is not a key path ({e.message})") from None

    outputs = [_check_output(relative, o) for o in _text_list(relative, "outputs", data.get("outputs"), True)]
    if not outputs:
        raise ManifestInvalid(relative, "outputs", "must list at least one file")
    if len(set(outputs)) != len(outputs):
        raise ManifestInvalid(relative, "outputs", "lists a file twice")
    keys = [key_for(o) for o in outputs]
    if len(set(keys)) != len(keys):
        raise ManifestInvalid(relative, "outputs", "two outputs would mount at the same key")

    command = data.get("command")
    if command is not None:
        command = tuple(_text_list(relative, "command", command, required=True))
        if not command:
            raise ManifestInvalid(relative, "command", "must not be empty")

    network = data.get("network", False)
    if not isinstance(network, bool):
        raise ManifestInvalid(relative, "network", "must be true or false")
    timeout = data.get("timeout")
    if timeout is not None and (isinstance(timeout, bool) or not isinstance(timeout, (int, float)) or timeout <= 0):
        raise ManifestInvalid(relative, "timeout", "must be a positive number of seconds")

    return AnalysisManifest(name, image.strip(), tuple(inputs), tuple(outputs), command, network,
                            float(timeout) if timeout is not None else None, path, relative)


def load_manifest(bundle: Path, root: Path) -> AnalysisManifest:
    """Read ``<bundle>/manifest.yaml``.

    Raises:
        ManifestMissing, ManifestInvalid.
    """
    relative = bundle.relative_to(root).as_posix()
    manifest_file = bundle / MANIFEST_NAME
    if not manifest_file.is_file():
        raise ManifestMissing(relative)
    try:
        data = yaml.safe_load(manifest_file.read_text(encoding="utf-8"))
    except (yaml.YAMLError, UnicodeDecodeError) as e:
        raise ManifestInvalid(relative, "<file>", f"is not readable YAML ({e})") from None
    return parse_manifest(data, relative, bundle)


def _bundle_dirs(root: Path, exclude: Iterable[Path]) -> List[Path]:
    excluded = {(root / DEFAULT_OUTPUT_DIR).resolve()} | {Path(p).resolve() for p in exclude}
    found = []
    for dirpath, dirnames, _ in os.walk(root):
        current = Path(dirpath)
        keep = []
        for d in sorted(dirnames):
            if d.startswith(".") or (current / d).resolve() in excluded:
                continue
            if d.endswith(ANALYSIS_SUFFIX):
                found.append(current / d)
            else:
                keep.append(d)
        dirnames[:] = keep
    return sorted(found, key=lambda p: p.relative_to(root).as_posix())


def discover_bundles(root: Path, exclude: Iterable[Path] = (), report=None) -> List[Tuple[Path, AnalysisManifest]]:
    """Every ``*.analysis`` directory under ``root`` with its manifest, sorted by path.

    Raises:
        ManifestMissing, ManifestInvalid, DuplicateBundleName: only when
            ``report`` is None; otherwise recorded and the bundle dropped.
    """
    root = Path(root).resolve()
    bundles: List[Tuple[Path, AnalysisManifest]] = []
    for bundle in _bundle_dirs(root, exclude):
        try:
            bundles.append((bundle, load_manifest(bundle, root)))
        except VerdadError as e:
            if report is None:
                raise
            report.error(e)

    by_name: Dict[str, List[AnalysisManifest]] = {}
    for _, manifest in bundles:
        by_name.setdefault(manifest.name, []).append(manifest)
    result = []
    for path, manifest in bundles:
        same = by_name[manifest.name]
        if len(same) > 1:
            if same[0] is manifest:
                error = DuplicateBundleName(manifest.name, [m.relative for m in same])
                if report is None:
                    raise error
                report.error(error)
            continue
        result.append((path, manifest))
    logger.debug(f"Discovered {len(result)} analysis bundles")
    return result


def bundle_templates(manifest: AnalysisManifest, report=None) -> List[TemplateUnit]:
    return discover_templates(manifest.path, report=report)


def validate_inputs(manifest: AnalysisManifest, units: Iterable[TemplateUnit]) -> None:
    """Declared inputs must cover every key the bundle templates read.

    Raises:
        ManifestInvalid: a template depends on an undeclared key.
    """
    undeclared = set()
    for unit in units:
        for dependency in unit.dependencies:
            if not any(dependency.startswith(declared) for declared in manifest.inputs):
                undeclared.add(str(dependency))
    if undeclared:
        raise ManifestInvalid(manifest.relative, "inputs",
                              f"does not declare keys read by bundle templates: {', '.join(sorted(undeclared))}")


def validate_bundle(manifest: AnalysisManifest, report=None) -> List[TemplateUnit]:
    """Discover the bundle's templates and check them against the manifest.

    Raises:
        TemplateSyntaxError, ManifestInvalid.
    """
    units = bundle_templates(manifest, report)
    for unit in units:
        if not unit.ok:
            raise unit.syntax_error
    validate_inputs(manifest, units)
    return units


__all__ = [
    "AnalysisManifest",
    "MANIFEST_NAME",
    "parse_manifest",
    "load_manifest",
    "discover_bundles",
    "bundle_templates",
    "validate_inputs",
    "validate_bundle",
]
