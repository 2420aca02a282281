"""``verdad query KEY``: print a resolved value with its provenance and history."""
import sys
from typing import Any, Dict

from commands.common import finish, load_project
from datamodel.serialize import dumps_tagged, provenance_to_json, to_tagged_json
from storage.store import Store
from utils.config import RunConfig
from utils.errors import VerdadError
from utils.report import RunReport


def describe(store: Store, key: str) -> Dict[str, Any]:
    """JSON-ready description of ``key``.

    Raises:
        NotFound: ``key`` does not resolve.
    """
    value = store.get(key)
    provenance = store.provenance(key)
    return {
        "key": key,
        "value": to_tagged_json(value),
        "provenance": provenance_to_json(provenance) if provenance is not None else None,
        "history": [
            {"version": item.version, "value": to_tagged_json(item.value),
             "provenance": provenance_to_json(item.provenance)}
            for item in store.history(key)
        ],
        "annotations": [to_tagged_json(a)["value"] for a in store.annotations_for(key)],
    }


def cmd_query(config: RunConfig, args) -> int:
    report = RunReport("query")
    store = load_project(config, report)
    try:
        sys.stdout.write(dumps_tagged(describe(store, args.key)))
    except VerdadError as e:
        report.error(e)
    return finish(config, report, echo=False)


def register(subparsers, parents=()) -> None:
    parser = subparsers.add_parser("query", parents=list(parents), help="show the value stored at a key")
    parser.add_argument("key", help="dot-separated key")
    parser.set_defaults(handler=cmd_query)


__all__ = ["describe", "cmd_query", "register"]
