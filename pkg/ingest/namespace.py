"""Map a project directory tree onto dot-separated keys.

``propulsion/engine.yaml`` is mounted at ``propulsion.engine``; its fields
are then reachable below that prefix (``propulsion.engine.thrust``).
"""
import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Mapping, NamedTuple, Optional, Set, Tuple

import yaml

from datamodel.records import SEPARATOR, KeyPath, Origin, ProvenanceRecord, SourceFormat
from datamodel.value import descend
from ingest.formats import ANALYSIS_SUFFIX, detect_format, is_sidecar, is_template, strip_template_extension
from ingest.parsers import parse_file
from utils.config import DEFAULT_OUTPUT_DIR
from utils.errors import InvalidKeySegment, NamespaceCollision, VerdadError
from utils.logger import logger

MAX_WORKERS = 8


class NamespaceEntry(NamedTuple):
    key: KeyPath
    value: Any
    provenance: ProvenanceRecord


class SourceFile(NamedTuple):
    path: Path
    relative: str
    format: SourceFormat
    key: KeyPath


def content_hash(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


def key_for(relative: str) -> KeyPath:
    """Key prefix for a project-relative file path: directories plus the stem."""
    parts = relative.split("/")
    stem = parts[-1].rsplit(".", 1)[0] if "." in parts[-1] else parts[-1]
    segments = parts[:-1] + [stem]
    for segment in segments:
        if not segment:
            raise InvalidKeySegment(f"'{relative}' maps to an empty key segment")
        if SEPARATOR in segment:
            raise InvalidKeySegment(
                f"'{relative}': name '{segment}' contains '.', which is reserved as the key separator",
                path=relative,
            )
    return KeyPath(tuple(segments))


# ========== generated outputs ==========

GENERATED_FILE = "generated.yaml"


def read_generated(out_dir: Path) -> Dict[str, str]:
    """Outputs written by earlier renders: project-relative path -> content hash."""
    path = Path(out_dir) / GENERATED_FILE
    if not path.is_file():
        return {}
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        logger.warning(f"Ignoring unreadable {path}: {e}")
        return {}
    if not isinstance(data, dict):
        logger.warning(f"Ignoring {path}: expected a mapping of output paths to hashes")
        return {}
    return {str(k): str(v) for k, v in data.items()}


def write_generated(out_dir: Path, records: Mapping[str, str]) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / GENERATED_FILE
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        yaml.safe_dump(dict(sorted(records.items())), f, sort_keys=False, allow_unicode=True)
    return path


def is_generated(path: Path, relative: str, records: Mapping[str, str]) -> bool:
    """True if ``path`` still holds exactly what a render wrote there."""
    digest = records.get(relative)
    return digest is not None and path.is_file() and content_hash(path.read_bytes()) == digest


def _excluded_dirs(root: Path, exclude: Iterable[Path]) -> Set[Path]:
    dirs = {(root / DEFAULT_OUTPUT_DIR).resolve()}
    dirs.update(Path(p).resolve() for p in exclude)
    return dirs


def iter_source_files(root: Path, exclude: Iterable[Path] = (), report=None,
                      generated: Optional[Mapping[str, str]] = None) -> Iterator[SourceFile]:
    """Yield ingestible data files in lexicographic depth-first order.

    Skips dotfiles, templates, ``.analysis`` bundles, annotation sidecars,
    excluded directories and files of unknown format (recorded in ``report``
    as skipped). A template's output is skipped only while it is unchanged
    since the render recorded in ``generated`` wrote it; otherwise it is
    user data and rendering onto it is a collision.
    """
    root = Path(root).resolve()
    excluded = _excluded_dirs(root, exclude)
    generated = generated or {}

    def walk(directory: Path) -> Iterator[SourceFile]:
        try:
            children = sorted(os.scandir(directory), key=lambda e: e.name)
        except OSError as e:
            logger.warning(f"Cannot read directory {directory}: {e}")
            return
        names = {c.name for c in children}
        rendered = {strip_template_extension(Path(n)).name for n in names if is_template(n)}
        for child in children:
            path = Path(child.path)
            if child.name.startswith(".") or path.resolve() in excluded:
                continue
            relative = path.relative_to(root).as_posix()
            if child.is_dir():
                if child.name.endswith(ANALYSIS_SUFFIX):
                    continue
                yield from walk(path)
                continue
            if is_template(child.name) or is_sidecar(child.name):
                continue
            if child.name in rendered and is_generated(path, relative, generated):
                continue
            fmt = detect_format(child.name)
            if fmt is None:
                if report is not None:
                    report.skip(relative)
                else:
                    logger.debug(f"Skipping opaque file {relative}")
                continue
            try:
                key = key_for(relative)
            except InvalidKeySegment as e:
                if report is None:
                    raise
                report.error(e, path=relative)
                continue
            yield SourceFile(path, relative, fmt, key)

    yield from walk(root)


def _load(source: SourceFile) -> Tuple[Optional[Any], Optional[bytes], Optional[VerdadError]]:
    try:
        data = source.path.read_bytes()
        return parse_file(data, source.format, source.relative), data, None
    except VerdadError as e:
        return None, None, e


def _conflicts(shorter: NamespaceEntry, longer_key: KeyPath) -> bool:
    rest = longer_key.relative_to(shorter.key)
    try:
        descend(shorter.value, rest[0])
    except KeyError:
        return False
    return True


def _check_collision(entry: NamespaceEntry, mounted: Dict[KeyPath, NamespaceEntry]) -> None:
    key = entry.key
    existing = mounted.get(key)
    if existing is not None:
        raise NamespaceCollision(key, existing.provenance.source_path, entry.provenance.source_path)
    for prefix in list(key.prefixes())[1:]:
        parent = mounted.get(prefix)
        if parent is not None and _conflicts(parent, key):
            raise NamespaceCollision(key, parent.provenance.source_path, entry.provenance.source_path)
    for other_key, other in mounted.items():
        if len(other_key) > len(key) and other_key.startswith(key) and _conflicts(entry, other_key):
            raise NamespaceCollision(other_key, other.provenance.source_path, entry.provenance.source_path)


def build_namespace(root: Path, *, exclude: Iterable[Path] = (), report=None,
                    generated: Optional[Mapping[str, str]] = None,
                    first_sequence: int = 1) -> List[NamespaceEntry]:
    """Load every data file under ``root`` into (key, value, provenance) entries.

    Parsing runs in a thread pool; mounting is a sequential pass over the
    sorted file list, so the result is identical across runs.

    Args:
        root: project directory.
        exclude: extra directories to leave out (the output directory is
            always left out).
        report: when given, per-file errors are recorded there and the file
            is skipped; otherwise the first error is raised.
        generated: outputs recorded by earlier renders (see
            :func:`read_generated`); those files are not data.
        first_sequence: load sequence number of the first file.

    Raises:
        ParseError, CoercionError, NamespaceCollision, InvalidKeySegment.
    """
    root = Path(root).resolve()
    sources = list(iter_source_files(root, exclude, report, generated))
    if not sources:
        return []
    with ThreadPoolExecutor(max_workers=min(MAX_WORKERS, len(sources))) as pool:
        loaded = list(pool.map(_load, sources))

    entries: List[NamespaceEntry] = []
    mounted: Dict[KeyPath, NamespaceEntry] = {}
    sequence = first_sequence
    for source, (value, data, error) in zip(sources, loaded):
        if error is not None:
            if report is None:
                raise error
            report.error(error, path=source.relative)
            continue
        provenance = ProvenanceRecord(source.relative, source.format, content_hash(data),
                                      Origin.user_input(), sequence)
        entry = NamespaceEntry(source.key, value, provenance)
        try:
            _check_collision(entry, mounted)
        except NamespaceCollision as e:
            if report is None:
                raise
            report.error(e)
            continue
        mounted[entry.key] = entry
        entries.append(entry)
        sequence += 1
    logger.debug(f"Mounted {len(entries)} data files from {root}")
    return entries


def hash_tree(root: Path, exclude: Iterable[Path] = ()) -> Dict[str, str]:
    """Content hash of every regular file under ``root`` outside ``exclude``."""
    root = Path(root).resolve()
    excluded = {Path(p).resolve() for p in exclude}
    hashes: Dict[str, str] = {}
    for dirpath, dirnames, filenames in os.walk(root):
        current = Path(dirpath)
        dirnames[:] = sorted(d for d in dirnames if (current / d).resolve() not in excluded)
        for name in sorted(filenames):
            path = current / name
            hashes[path.relative_to(root).as_posix()] = content_hash(path.read_bytes())
    return hashes


__all__ = [
    "NamespaceEntry",
    "SourceFile",
    "build_namespace",
    "iter_source_files",
    "key_for",
    "content_hash",
    "hash_tree",
    "GENERATED_FILE",
    "read_generated",
    "write_generated",
    "is_generated",
]
