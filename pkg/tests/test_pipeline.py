from random import Random

import pytest

from analysis.manifest import parse_manifest
from analysis.pipeline import bundle_order, dependency_graph, ingest_outputs, run_pipeline
from analysis.runtime import BundleRun, BundleStatus
from commands.run import cmd_run
from ingest.namespace import hash_tree
from tests.conftest import FakeRuntime, make_config, store_for, write_json_output
from utils.config import RenderMode
from utils.errors import BundleNotExecuted, DependencyCycle
from utils.report import RunReport


def manifest(name, inputs=(), outputs=("out.json",)):
    return parse_manifest({"name": name, "image": "busybox", "inputs": list(inputs), "outputs": list(outputs)},
                          f"{name}.analysis")


def bundle_files(name, inputs, outputs, templates=None):
    lines = [f"name: {name}", "image: busybox", f"inputs: [{', '.join(inputs)}]", f"outputs: [{', '.join(outputs)}]"]
    files = {f"{name}.analysis/manifest.yaml": "\n".join(lines) + "\n"}
    for relative, body in (templates or {}).items():
        files[f"{name}.analysis/{relative}"] = body
    return files


CHAIN = {
    "mission.yaml": "dry_mass: {value: 850, unit: kg}\n",
    **bundle_files("trajectory", ["mission.dry_mass"], ["dv.json"]),
    **bundle_files("margins", ["analysis.trajectory.dv"], ["margin.yaml"],
                   {"in.txt.j2": "{{ analysis.trajectory.dv.total }}\n"}),
    "summary.md.j2": "dv={{ analysis.trajectory.dv.total }} margin={{ analysis.margins.margin.ratio }}",
}


def chain_runtime():
    def margins(workdir):
        seen = (workdir / "in.txt").read_text(encoding="utf-8").strip()
        (workdir / "margin.yaml").write_text(f"ratio: 0.1\nseen: '{seen}'\n", encoding="utf-8")
        return 0
    return FakeRuntime({"trajectory": write_json_output("dv.json", {"total": {"value": 1000, "unit": "m/s"}}),
                        "margins": margins})


# ========== ordering ==========

def test_dependency_graph_follows_analysis_inputs():
    manifests = [manifest("a", ["analysis.b.out"]), manifest("b", ["mission"]), manifest("c", ["analysis"])]
    assert dependency_graph(manifests) == {"a": {"b"}, "b": set(), "c": {"a", "b"}}
    with pytest.raises(DependencyCycle):
        bundle_order([manifest("d", ["analysis.d.out"])])


def test_cycle_is_rejected(make_project):
    with pytest.raises(DependencyCycle):
        bundle_order([manifest("a", ["analysis.b.out"]), manifest("b", ["analysis.a.out"])])
    root = make_project({**bundle_files("a", ["analysis.b.out"], ["out.json"]),
                         **bundle_files("b", ["analysis.a.out"], ["out.json"])})
    report = RunReport("run")
    run_pipeline(root, store_for(root), FakeRuntime(), make_config(root), report)
    assert [e["kind"] for e in report.errors] == ["DependencyCycle"]
    assert {b["status"] for b in report.bundles} == {"Discovered"}


# ========== execution ==========

def test_chain_runs_upstream_first_and_feeds_outputs(make_project):
    root = make_project(CHAIN)
    runtime = chain_runtime()
    report = RunReport("run")
    store = run_pipeline(root, store_for(root), runtime, make_config(root), report)
    assert [c["name"] for c in runtime.calls] == ["trajectory", "margins"]
    assert report.ok, report.errors
    assert store.get("analysis.margins.margin.seen") == "1000.0 m/s"
    assert store.provenance("analysis.trajectory.dv").origin.bundle == "trajectory"
    assert [b["status"] for b in report.bundles] == ["Executed", "Executed"]
    assert (root / "summary.md").read_text(encoding="utf-8") == "dv=1000.0 m/s margin=0.1\n"


def test_without_runtime_downstream_is_staged_with_placeholders(make_project):
    root = make_project(CHAIN)
    config = make_config(root)
    report = RunReport("run")
    run_pipeline(root, store_for(root), None, config, report)
    assert report.ok, report.errors
    assert [b["status"] for b in report.bundles] == ["RenderedOnly", "RenderedOnly"]
    staged = (config.staging_root / "margins" / "in.txt").read_text(encoding="utf-8")
    assert staged == "MISSING(analysis.trajectory.dv.total)\n"
    assert "PendingAnalysis" in {w["kind"] for w in report.warnings}
    assert not (root / "summary.md").exists()


def test_failed_upstream_leaves_downstream_discovered(make_project):
    root = make_project(CHAIN)
    report = RunReport("run")
    run_pipeline(root, store_for(root), FakeRuntime({"trajectory": lambda workdir: 1}), make_config(root), report)
    statuses = {b["name"]: b["status"] for b in report.bundles}
    assert statuses == {"margins": "Discovered", "trajectory": "ExecFailed"}
    assert {"BundleExecutionFailed", "MissingInput"} <= {e["kind"] for e in report.errors}


def test_unparseable_output_is_an_error(make_project):
    root = make_project(bundle_files("trajectory", [], ["dv.json"]))

    def broken(workdir):
        (workdir / "dv.json").write_text("{oops", encoding="utf-8")
        return 0
    report = RunReport("run")
    store = run_pipeline(root, store_for(root), FakeRuntime({"trajectory": broken}), make_config(root), report)
    assert not store.has("analysis")
    assert [e["kind"] for e in report.errors] == ["ParseError"]
    assert report.bundles[0]["status"] == "ExecFailed"


def test_unknown_unit_in_output_fails_only_that_bundle(make_project):
    root = make_project({**bundle_files("trajectory", [], ["dv.json"]), **bundle_files("power", [], ["budget.json"])})
    runtime = FakeRuntime({"trajectory": write_json_output("dv.json", {"total": {"value": 1, "unit": "furlong"}}),
                           "power": write_json_output("budget.json", {"peak": {"value": 120, "unit": "W"}})})
    report = RunReport("run")
    store = run_pipeline(root, store_for(root), runtime, make_config(root), report)
    assert [e["kind"] for e in report.errors] == ["CoercionError"]
    assert report.errors[0]["bundle"] == "trajectory"
    assert {b["name"]: b["status"] for b in report.bundles} == {"power": "Executed", "trajectory": "ExecFailed"}
    assert not store.has("analysis.trajectory")
    assert str(store.get("analysis.power.budget.peak")) == "120.0 W"


def test_unknown_unit_in_output_is_reported_by_run(example_project):
    runtime = FakeRuntime({"trajectory": write_json_output("dv.json", {"total": {"value": 3, "unit": "furlong"}})})
    assert cmd_run(make_config(example_project), runtime=runtime) == 1
    assert (example_project / "_verdad" / "report.yaml").is_file()


def test_ingest_requires_executed_bundle(tmp_path):
    run = BundleRun("trajectory", tmp_path, BundleStatus.RENDERED_ONLY)
    with pytest.raises(BundleNotExecuted):
        ingest_outputs(run, store_for(tmp_path))


def test_final_store_does_not_depend_on_launch_order(make_project):
    files = {}
    behaviours = {}
    for name in ("alpha", "beta", "gamma", "delta"):
        files.update(bundle_files(name, [], ["result.json"]))
        behaviours[name] = write_json_output("result.json", {"bundle": name, "value": len(name)})
    root = make_project(files)

    snapshots = set()
    for seed in range(4):
        report = RunReport("run")
        store = run_pipeline(root, store_for(root), FakeRuntime(behaviours), make_config(root), report,
                             rng=Random(seed))
        assert report.ok
        snapshots.add(store.canonical_bytes())
    assert len(snapshots) == 1


# ========== example project ==========

def test_example_mission_end_to_end(example_project, trajectory_runtime):
    config = make_config(example_project, dump_store=True)
    assert cmd_run(config, runtime=trajectory_runtime) == 0
    report = (example_project / "report.md").read_text(encoding="utf-8")
    assert "Total delta-v: 1033.4 m/s" in report
    assert "Thrust: 0.44 kN" in report
    assert "> question" in report
    assert (config.out / "report.yaml").is_file()
    assert (config.out / "store.json").is_file()
    assert (config.staging_root / "trajectory" / "config.yaml").read_text(encoding="utf-8").startswith("isp_s: 317")


def test_example_mission_permissive_without_runtime(example_project):
    config = make_config(example_project, mode=RenderMode.PERMISSIVE)
    assert cmd_run(config) == 0
    report = (example_project / "report.md").read_text(encoding="utf-8")
    assert "Total delta-v: MISSING(analysis.trajectory.dv.total)" in report


def test_run_leaves_inputs_alone_and_repeats_byte_for_byte(example_project, trajectory_runtime):
    config = make_config(example_project, dump_store=True)
    inputs = hash_tree(example_project, exclude=[config.out])

    assert cmd_run(config, runtime=trajectory_runtime) == 0
    first = hash_tree(example_project)
    assert cmd_run(config, runtime=trajectory_runtime) == 0
    second = hash_tree(example_project)

    assert second == first
    assert {path: first[path] for path in inputs} == inputs
    assert set(hash_tree(example_project, exclude=[config.out])) - set(inputs) == {"report.md"}
