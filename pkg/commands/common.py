"""Phases shared by the project commands."""
import sys
from typing import List, Optional

from analysis.manifest import AnalysisManifest, discover_bundles, validate_bundle
from ingest.annotations import load_sidecar_annotations
from ingest.namespace import build_namespace, read_generated
from storage.store import Store
from utils.config import RunConfig
from utils.errors import VerdadError
from utils.logger import logger
from utils.report import RunReport


def load_project(config: RunConfig, report: RunReport) -> Store:
    """Ingest every data file and attach the sidecar annotations.

    Per-file problems are recorded in ``report``; the returned store holds
    everything that did load.
    """
    generated = read_generated(config.out)
    entries = build_namespace(config.root, exclude=[config.out], report=report, generated=generated)
    store = Store.empty().commit(entries)
    annotations = load_sidecar_annotations(config.root, exclude=[config.out], report=report, generated=generated)
    store = store.attach_annotations(annotations)
    for annotation in store.unresolved_annotations():
        report.annotations_unresolved.append({
            "target": str(annotation.target),
            "kind": annotation.kind.value,
            "author": annotation.author,
            "body": annotation.body,
        })
        report.warning("AnnotationTargetMissing",
                       f"annotation by {annotation.author} targets missing key {annotation.target}",
                       key=str(annotation.target), path=annotation.sidecar)
    logger.info(f"Loaded {len(store.entries)} data files, {len(store.annotations)} annotations")
    return store


def validated_bundles(config: RunConfig, report: RunReport) -> List[AnalysisManifest]:
    """Discovered bundles whose manifests and templates check out."""
    manifests = []
    for _, manifest in discover_bundles(config.root, [config.out], report):
        try:
            validate_bundle(manifest, report)
        except VerdadError as e:
            report.error(e)
            continue
        manifests.append(manifest)
    return manifests


def finish(config: RunConfig, report: RunReport, store: Optional[Store] = None, echo: bool = True) -> int:
    """Write the report (and the store dump when asked) and pick the exit code."""
    if store is not None:
        report.precedence_overrides = [o.to_report() for o in store.precedence_overrides]
        for override in store.precedence_overrides:
            # already logged when the store resolved the conflict
            entry = {"kind": "PrecedenceOverride",
                     "message": f"analysis output {override.key} yields to user input {override.user_key}",
                     "key": str(override.key), "bundle": override.bundle}
            if entry not in report.warnings:
                report.warnings.append(entry)
    report.write(config.out)
    if store is not None and config.dump_store:
        store.dump(config.out / "store.json")
    if echo and config.json:
        sys.stdout.write(report.to_json() + "\n")
    if report.ok:
        logger.info(f"{report.command}: ok ({len(report.warnings)} warnings)")
        return 0
    logger.error(f"{report.command}: {len(report.errors)} errors, {len(report.warnings)} warnings")
    return 1


__all__ = ["load_project", "validated_bundles", "finish"]
