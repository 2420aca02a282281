"""Run every analysis bundle in dependency order and feed outputs back.

A bundle that declares an input under ``analysis.<other>`` runs after
``<other>``. Bundles whose dependencies are satisfied run concurrently;
their outputs are merged into the store one bundle at a time, in name
order, so the final store does not depend on the schedule.
"""
from concurrent.futures import ThreadPoolExecutor
from graphlib import CycleError, TopologicalSorter
from pathlib import Path
from random import Random
from typing import Any, Dict, Iterable, Optional, Set, Tuple

from analysis.manifest import AnalysisManifest, discover_bundles, validate_bundle
from analysis.runtime import BundleRun, BundleStatus, execute_bundle
from analysis.staging import missing_inputs, stage_bundle
from datamodel.records import KeyPath, Origin, ProvenanceRecord
from ingest.formats import detect_format
from ingest.namespace import content_hash, key_for
from ingest.parsers import parse_file
from storage.store import ANALYSIS_ROOT, Store
from templating.renderer import render_all
from utils.config import RenderMode, RunConfig
from utils.errors import BundleExecutionFailed, BundleNotExecuted, DependencyCycle, MissingOutputs, VerdadError
from utils.logger import logger

MAX_WORKERS = 4


# ========== ordering ==========

def upstream_of(manifest: AnalysisManifest, names: Iterable[str]) -> Set[str]:
    """Bundles whose outputs ``manifest`` reads through ``analysis.<name>`` inputs.

    A broad input such as ``analysis`` reads every other bundle; only an
    explicit ``analysis.<own name>`` input makes a bundle depend on itself.
    """
    upstream = set()
    for name in names:
        mount = KeyPath.of(ANALYSIS_ROOT, name)
        for key in manifest.inputs:
            if key.startswith(mount) or (name != manifest.name and mount.startswith(key)
                                         and key.head == ANALYSIS_ROOT):
                upstream.add(name)
    return upstream


def dependency_graph(manifests: Iterable[AnalysisManifest]) -> Dict[str, Set[str]]:
    manifests = list(manifests)
    names = [m.name for m in manifests]
    return {m.name: upstream_of(m, names) for m in manifests}


def bundle_order(manifests: Iterable[AnalysisManifest]) -> TopologicalSorter:
    """A prepared sorter over the bundles.

    Raises:
        DependencyCycle: the ``analysis.*`` inputs form a cycle.
    """
    sorter = TopologicalSorter(dependency_graph(manifests))
    try:
        sorter.prepare()
    except CycleError as e:
        raise DependencyCycle(e.args[1]) from None
    return sorter


# ========== outputs ==========

def _source_label(path: Path, root: Optional[Path]) -> str:
    if root is not None:
        try:
            return path.resolve().relative_to(Path(root).resolve()).as_posix()
        except ValueError:
            pass
    return path.as_posix()


def ingest_outputs(run: BundleRun, store: Store, root: Optional[Path] = None) -> Store:
    """Parse the produced files of an executed bundle into a new store version.

    Each output ``<dir>/<stem>.<ext>`` is mounted at
    ``analysis.<bundle>.<dir>.<stem>``.

    Raises:
        BundleNotExecuted: ``run`` did not reach Executed.
        ParseError, CoercionError: an output file does not load; nothing is merged.
    """
    if run.status != BundleStatus.EXECUTED:
        raise BundleNotExecuted(f"bundle '{run.name}' has status {run.status.value}; outputs cannot be ingested",
                                bundle=run.name)
    outputs = []
    for relative, _ in run.produced:
        path = run.staging / relative
        fmt = detect_format(relative)
        if fmt is None:
            logger.warning(f"Bundle '{run.name}' output {relative} has no known format; not ingested")
            continue
        data = path.read_bytes()
        value = parse_file(data, fmt, _source_label(path, root))
        key = key_for(relative)
        provenance = ProvenanceRecord(_source_label(path, root), fmt, content_hash(data),
                                      Origin.analysis_output(run.name), 0)
        outputs.append((key, value, provenance))
    return store.merge_analysis_outputs(run.name, outputs)


# ========== pipeline ==========

def _stage_and_execute(manifest: AnalysisManifest, store: Store, runtime: Any, config: RunConfig,
                       pending: Set[KeyPath]) -> Tuple[BundleRun, Optional[VerdadError]]:
    try:
        if runtime is None and pending:
            # not executed anyway: render with placeholders for upstream outputs
            staged = stage_bundle(manifest, store, config.staging_root, RenderMode.PERMISSIVE, check_inputs=False)
        else:
            staged = stage_bundle(manifest, store, config.staging_root, config.mode)
    except VerdadError as e:
        return BundleRun(manifest.name, None, BundleStatus.DISCOVERED, path=manifest.relative), e
    run = execute_bundle(staged, manifest, runtime, timeout=config.timeout, network=config.network,
                         log_dir=config.out / "logs")
    return run, None


def run_pipeline(root: Path, store: Store, runtime: Any, config: RunConfig, report,
                 rng: Optional[Random] = None) -> Store:
    """Stage, execute and ingest every bundle, then re-render all templates.

    Args:
        root: project directory.
        store: the store after ingestion of user data.
        runtime: a container runtime, or None to render bundles only.
        config: run configuration (mode, timeout, network, output dir).
        report: run report receiving bundle entries and errors.
        rng: when given, shuffles the launch order inside each ready set.

    Returns:
        The store holding every ingested analysis output.
    """
    root = Path(root).resolve()
    bundles = discover_bundles(root, [config.out], report)
    manifests: Dict[str, AnalysisManifest] = {}
    for _, manifest in bundles:
        try:
            validate_bundle(manifest, report)
        except VerdadError as e:
            report.error(e)
            report.bundles.append(manifest.to_report())
            continue
        manifests[manifest.name] = manifest

    try:
        sorter = bundle_order(manifests.values())
    except DependencyCycle as e:
        report.error(e)
        report.bundles.extend(m.to_report() for m in manifests.values())
        return store

    graph = dependency_graph(manifests.values())
    runs: Dict[str, BundleRun] = {}
    while sorter.is_active():
        ready = sorted(sorter.get_ready())
        if rng is not None:
            rng.shuffle(ready)
        jobs = []
        for name in ready:
            manifest = manifests[name]
            missing = missing_inputs(manifest, store)
            unexecuted = {up for up in graph[name] if runs[up].status != BundleStatus.EXECUTED}
            pending = {k for k in missing
                       if any(k.startswith(KeyPath.of(ANALYSIS_ROOT, up)) for up in unexecuted)}
            if runtime is None and pending and pending == set(missing):
                report.warning("PendingAnalysis",
                               f"bundle '{name}' staged with placeholders for {', '.join(sorted(map(str, pending)))}",
                               bundle=name)
            else:
                pending = set()
            jobs.append((manifest, pending))

        with ThreadPoolExecutor(max_workers=min(MAX_WORKERS, len(jobs))) as pool:
            finished = list(pool.map(lambda job: _stage_and_execute(job[0], store, runtime, config, job[1]), jobs))

        for run, error in sorted(finished, key=lambda item: item[0].name):
            runs[run.name] = run
            if error is not None:
                report.error(error)
            elif run.status == BundleStatus.EXEC_FAILED:
                report.error(BundleExecutionFailed(run.name, f"exit code {run.exit_code}",
                                                   run.log_path.as_posix() if run.log_path else None))
            elif run.status == BundleStatus.OUTPUT_MISSING:
                report.error(MissingOutputs(run.name, run.missing_outputs))
            elif run.status == BundleStatus.EXECUTED:
                try:
                    store = ingest_outputs(run, store, root)
                except VerdadError as e:
                    report.error(e, bundle=run.name)
                    run.status = BundleStatus.EXEC_FAILED
        sorter.done(*ready)

    report.bundles.extend(runs[name].to_report() for name in sorted(runs))
    report.bundles.sort(key=lambda entry: entry["name"])
    render_all(root, store, config.mode, report, exclude=[config.out], bundles=manifests.values(),
               out=config.out)
    return store


__all__ = [
    "upstream_of",
    "dependency_graph",
    "bundle_order",
    "ingest_outputs",
    "run_pipeline",
]
