"""Review annotations stored in ``<data file>.annotations.yaml`` sidecars.

A sidecar is a YAML list of entries::

    - target: thrust            # relative to the data file's mount key
      kind: question            # comment | question | issue | suggestion
      author: rev1
      body: source?
      timestamp: 2024-05-01T09:30:00Z

The data file itself is never opened for writing.
"""
from datetime import date, datetime
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional

import yaml

from datamodel.records import AnnotationRecord, KeyPath
from datamodel.timescales import Epoch, epoch_from_datetime, format_epoch, parse_epoch
from ingest.formats import SIDECAR_SUFFIX
from ingest.namespace import SourceFile, iter_source_files
from utils.errors import InvalidKeySegment, InvalidValue, ParseError, TimeError
from utils.logger import logger

REQUIRED_FIELDS = ("kind", "author", "body", "timestamp")


def sidecar_path(data_file: Path) -> Path:
    return data_file.with_name(data_file.name + SIDECAR_SUFFIX)


def _timestamp(raw: Any) -> Epoch:
    if isinstance(raw, (datetime, date)):
        return epoch_from_datetime(raw)
    if isinstance(raw, str):
        return parse_epoch(raw)
    raise InvalidValue(f"timestamp must be ISO-8601 text, got {raw!r}")


def _target(mount: KeyPath, raw: Any) -> KeyPath:
    if raw is None or raw == "":
        return mount
    if not isinstance(raw, str):
        raw = str(raw)
    return mount.child(*KeyPath.parse(raw).segments)


def read_sidecar(path: Path, relative: str, mount: KeyPath) -> List[AnnotationRecord]:
    """Parse one sidecar file.

    Raises:
        ParseError: the file is not a YAML list of complete entries.
    """
    try:
        entries = yaml.safe_load(path.read_text(encoding="utf-8"))
    except UnicodeDecodeError:
        raise ParseError("YAML", relative, "sidecar is not valid UTF-8") from None
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise ParseError("YAML", relative, str(getattr(e, "problem", None) or e),
                         line=mark.line + 1 if mark else None) from None
    if entries is None:
        return []
    if not isinstance(entries, list):
        raise ParseError("YAML", relative, "an annotation sidecar must be a list of entries")

    records = []
    for index, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise ParseError("YAML", relative, f"entry {index} is not a mapping")
        missing = [f for f in REQUIRED_FIELDS if entry.get(f) in (None, "")]
        if missing:
            raise ParseError("YAML", relative, f"entry {index} lacks {', '.join(missing)}")
        try:
            records.append(AnnotationRecord(
                target=_target(mount, entry.get("target")),
                kind=str(entry["kind"]).lower(),
                author=str(entry["author"]),
                body=str(entry["body"]),
                timestamp=_timestamp(entry["timestamp"]),
                sidecar=relative,
            ))
        except (InvalidValue, InvalidKeySegment, TimeError) as e:
            raise ParseError("YAML", relative, f"entry {index}: {e.message}") from None
    return records


def load_sidecar_annotations(root: Path, exclude: Iterable[Path] = (), report=None,
                             generated: Optional[Mapping[str, str]] = None,
                             sources: Optional[List[SourceFile]] = None) -> List[AnnotationRecord]:
    """Collect the annotations of every data file under ``root``.

    Unresolvable targets are not checked here; the store flags them when the
    annotations are attached.
    """
    root = Path(root).resolve()
    if sources is None:
        sources = list(iter_source_files(root, exclude, report, generated))
    records: List[AnnotationRecord] = []
    for source in sources:
        sidecar = sidecar_path(source.path)
        if not sidecar.is_file():
            continue
        relative = sidecar.relative_to(root).as_posix()
        try:
            records.extend(read_sidecar(sidecar, relative, source.key))
        except ParseError as e:
            if report is None:
                raise
            report.error(e)
    logger.debug(f"Loaded {len(records)} annotations")
    return records


def annotation_entry(record: AnnotationRecord, mount: KeyPath) -> Dict[str, str]:
    relative = record.target.relative_to(mount)
    return {
        "target": ".".join(relative),
        "kind": record.kind.value,
        "author": record.author,
        "body": record.body,
        "timestamp": format_epoch(record.timestamp, with_scale=False) + "Z",
    }


def append_sidecar_entry(data_file: Path, record: AnnotationRecord, mount: KeyPath) -> Path:
    """Append ``record`` to the sidecar of ``data_file``, creating it if needed."""
    sidecar = sidecar_path(data_file)
    entries: List[Any] = []
    if sidecar.is_file():
        loaded = yaml.safe_load(sidecar.read_text(encoding="utf-8"))
        if loaded is not None:
            if not isinstance(loaded, list):
                raise ParseError("YAML", sidecar.name, "an annotation sidecar must be a list of entries")
            entries = loaded
    entries.append(annotation_entry(record, mount))
    with open(sidecar, "w", encoding="utf-8", newline="\n") as f:
        yaml.safe_dump(entries, f, sort_keys=False, allow_unicode=True)
    logger.info(f"Annotation appended to {sidecar.name}")
    return sidecar


__all__ = [
    "sidecar_path",
    "read_sidecar",
    "load_sidecar_annotations",
    "annotation_entry",
    "append_sidecar_entry",
]
