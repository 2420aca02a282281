"""``verdad annotate KEY``: append a review note to the owning file's sidecar."""
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from commands.common import finish, load_project
from datamodel.records import AnnotationKind, AnnotationRecord, KeyPath
from datamodel.timescales import epoch_from_datetime, parse_epoch
from ingest.annotations import append_sidecar_entry
from ingest.namespace import content_hash
from storage.store import Store
from utils.config import RunConfig
from utils.errors import InvalidKeySegment, TargetUnresolvable, VerdadError
from utils.logger import logger
from utils.report import RunReport


def annotate(root: Path, store: Store, target: str, kind: str, author: str, body: str,
             timestamp: Optional[str] = None) -> Path:
    """Record one annotation on ``target`` and return the sidecar path.

    Raises:
        TargetUnresolvable: ``target`` does not resolve to user data.
    """
    try:
        key = KeyPath.parse(target)
    except InvalidKeySegment:
        raise TargetUnresolvable(f"'{target}' is not a valid key", key=target) from None
    resolved = store.resolve_entry(key)
    if resolved is None or not store.has(key) or not resolved[1].provenance.origin.is_user_input:
        raise TargetUnresolvable(f"'{target}' does not resolve to ingested project data", key=target)
    mount, entry = resolved
    data_file = Path(root) / entry.provenance.source_path

    when = parse_epoch(timestamp) if timestamp else epoch_from_datetime(datetime.now(timezone.utc))
    record = AnnotationRecord(key, kind, author, body, when)

    before = content_hash(data_file.read_bytes())
    sidecar = append_sidecar_entry(data_file, record, mount)
    after = content_hash(data_file.read_bytes())
    if before != after:
        raise VerdadError(f"{entry.provenance.source_path} changed while annotating", path=entry.provenance.source_path)
    logger.info(f"{record.kind.value} by {author} on {key} stored in {sidecar.name}")
    return sidecar


def cmd_annotate(config: RunConfig, args) -> int:
    report = RunReport("annotate")
    store = load_project(config, report)
    try:
        annotate(config.root, store, args.target, args.kind, args.author, args.body, args.timestamp)
    except VerdadError as e:
        report.error(e)
    return finish(config, report)


def register(subparsers, parents=()) -> None:
    parser = subparsers.add_parser("annotate", parents=list(parents),
                                   help="attach a review note to a key without touching the data file")
    parser.add_argument("target", help="dot-separated key, e.g. propulsion.engine.thrust")
    parser.add_argument("--kind", required=True, choices=[k.value for k in AnnotationKind])
    parser.add_argument("--author", required=True)
    parser.add_argument("--body", required=True)
    parser.add_argument("--timestamp", help="ISO-8601 UTC time (default: now)")
    parser.set_defaults(handler=cmd_annotate)


__all__ = ["annotate", "cmd_annotate", "register"]
