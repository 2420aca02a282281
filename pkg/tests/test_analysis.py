import os
import stat

import pytest

from analysis.manifest import discover_bundles, load_manifest, parse_manifest, validate_bundle
from analysis.runtime import BundleStatus, ContainerRuntime, execute_bundle, resolve_runtime
from analysis.staging import stage_bundle
from tests.conftest import FakeRuntime, store_for, write_json_output
from utils.config import RenderMode, RuntimePolicy
from utils.errors import (DuplicateBundleName, ManifestInvalid, ManifestMissing, MissingInput,
                          RuntimeProbeFailed)
from utils.report import RunReport

MANIFEST = """\
    name: trajectory
    image: busybox:1.36
    command: [sh, run.sh]
    inputs: [mission.dry_mass]
    outputs: [dv.json]
    """

BUNDLE = {
    "mission.yaml": "name: probe\ndry_mass: {value: 850, unit: kg}\n",
    "trajectory.analysis/manifest.yaml": MANIFEST,
    "trajectory.analysis/config.yaml.j2": "mass_kg: {{ (mission.dry_mass | to('kg')).magnitude }}\n",
    "trajectory.analysis/run.sh": "#!/bin/sh\necho ok > dv.json\n",
    "trajectory.analysis/lib/helper.txt": "static\n",
}


@pytest.fixture
def bundle_project(make_project):
    root = make_project(BUNDLE)
    os.chmod(root / "trajectory.analysis" / "run.sh", 0o755)
    return root


def manifest_of(root):
    return load_manifest(root / "trajectory.analysis", root)


# ========== manifest ==========

VALID = {"name": "trajectory", "image": "busybox", "outputs": ["dv.json"]}


def test_parse_valid_manifest():
    manifest = parse_manifest({**VALID, "inputs": ["mission.dry_mass"], "command": ["sh", "run.sh"],
                               "timeout": 30}, "t.analysis")
    assert manifest.command == ("sh", "run.sh")
    assert [str(k) for k in manifest.inputs] == ["mission.dry_mass"]
    assert manifest.timeout == 30.0
    assert manifest.network is False


@pytest.mark.parametrize("changes, field", [
    ({"extra": 1}, "extra"),
    ({"name": "Trajectory!"}, "name"),
    ({"image": ""}, "image"),
    ({"outputs": []}, "outputs"),
    ({"outputs": ["/tmp/dv.json"]}, "outputs"),
    ({"outputs": ["../dv.json"]}, "outputs"),
    ({"outputs": ["dv.json", "dv.yaml"]}, "outputs"),
    ({"inputs": ["a..b"]}, "inputs"),
    ({"command": []}, "command"),
    ({"timeout": -1}, "timeout"),
    ({"network": "yes"}, "network"),
])
def test_invalid_manifests(changes, field):
    with pytest.raises(ManifestInvalid) as info:
        parse_manifest({**VALID, **changes}, "t.analysis")
    assert info.value.details["field"] == field


def test_missing_manifest(make_project):
    root = make_project({"orbit.analysis/run.sh": "true\n"})
    with pytest.raises(ManifestMissing):
        discover_bundles(root)
    report = RunReport("check")
    assert discover_bundles(root, report=report) == []
    assert report.errors[0]["kind"] == "ManifestMissing"


def test_duplicate_bundle_names(make_project):
    root = make_project({"a/x.analysis/manifest.yaml": MANIFEST, "b/y.analysis/manifest.yaml": MANIFEST})
    with pytest.raises(DuplicateBundleName):
        discover_bundles(root)


def test_bundles_are_not_data(bundle_project):
    store = store_for(bundle_project)
    assert store.top_level_names() == ("mission",)
    ((path, manifest),) = discover_bundles(bundle_project)
    assert manifest.name == "trajectory"
    assert path.name == "trajectory.analysis"


def test_undeclared_template_input(bundle_project):
    (bundle_project / "trajectory.analysis" / "extra.txt.j2").write_text("{{ mission.name }}", encoding="utf-8")
    with pytest.raises(ManifestInvalid) as info:
        validate_bundle(manifest_of(bundle_project))
    assert "mission.name" in info.value.message


# ========== staging ==========

def test_stage_bundle(bundle_project, tmp_path):
    manifest = manifest_of(bundle_project)
    staged = stage_bundle(manifest, store_for(bundle_project), tmp_path / "bundles")
    assert staged == tmp_path / "bundles" / "trajectory"
    assert (staged / "config.yaml").read_text(encoding="utf-8") == "mass_kg: 850.0\n"
    assert (staged / "lib" / "helper.txt").read_text(encoding="utf-8") == "static\n"
    assert os.stat(staged / "run.sh").st_mode & stat.S_IXUSR
    assert not (staged / "manifest.yaml").exists()
    assert not (staged / "config.yaml.j2").exists()


def test_restaging_starts_clean(bundle_project, tmp_path):
    manifest = manifest_of(bundle_project)
    staged = stage_bundle(manifest, store_for(bundle_project), tmp_path)
    (staged / "dv.json").write_text("{}", encoding="utf-8")
    staged = stage_bundle(manifest, store_for(bundle_project), tmp_path)
    assert not (staged / "dv.json").exists()


def test_missing_declared_input(bundle_project, tmp_path):
    (bundle_project / "mission.yaml").write_text("name: probe\n", encoding="utf-8")
    with pytest.raises(MissingInput):
        stage_bundle(manifest_of(bundle_project), store_for(bundle_project), tmp_path)


def test_unchecked_staging_renders_placeholders(bundle_project, tmp_path):
    (bundle_project / "mission.yaml").write_text("name: probe\n", encoding="utf-8")
    staged = stage_bundle(manifest_of(bundle_project), store_for(bundle_project), tmp_path,
                          RenderMode.PERMISSIVE, check_inputs=False)
    assert "MISSING(mission.dry_mass.magnitude)" in (staged / "config.yaml").read_text(encoding="utf-8")


# ========== runtime ==========

def test_command_line_isolates_network(tmp_path):
    argv = ContainerRuntime("podman").command_line("busybox", tmp_path, ["sh", "run.sh"], False, "job")
    assert argv[:5] == ["podman", "run", "--rm", "--name", "job"]
    assert argv[argv.index("--network") + 1] == "none"
    assert f"{tmp_path.resolve()}:/work" in argv
    assert argv[-3:] == ["busybox", "sh", "run.sh"]
    assert "--network" not in ContainerRuntime().command_line("busybox", tmp_path, None, True, "job")


def test_resolve_runtime_policies():
    assert resolve_runtime(RuntimePolicy.DISABLED) is None
    assert resolve_runtime(RuntimePolicy.AUTO, "verdad-no-such-engine") is None
    with pytest.raises(RuntimeProbeFailed):
        resolve_runtime(RuntimePolicy.REQUIRED, "verdad-no-such-engine")


def test_execute_without_runtime_is_rendered_only(bundle_project, tmp_path):
    manifest = manifest_of(bundle_project)
    staged = stage_bundle(manifest, store_for(bundle_project), tmp_path)
    run = execute_bundle(staged, manifest, None)
    assert run.status == BundleStatus.RENDERED_ONLY
    assert "exit_code" not in run.to_report()


def test_execute_statuses(bundle_project, tmp_path):
    manifest = manifest_of(bundle_project)
    staged = stage_bundle(manifest, store_for(bundle_project), tmp_path / "bundles")
    logs = tmp_path / "logs"

    failed = execute_bundle(staged, manifest, FakeRuntime({"trajectory": lambda workdir: 3}), log_dir=logs)
    assert failed.status == BundleStatus.EXEC_FAILED
    assert failed.exit_code == 3
    assert (logs / "trajectory.log").read_text(encoding="utf-8") == "trajectory finished with 3\n"

    silent = execute_bundle(staged, manifest, FakeRuntime())
    assert silent.status == BundleStatus.OUTPUT_MISSING
    assert silent.missing_outputs == ["dv.json"]

    runtime = FakeRuntime({"trajectory": write_json_output("dv.json", {"total": 1})})
    done = execute_bundle(staged, manifest, runtime, timeout=12.0)
    assert done.status == BundleStatus.EXECUTED
    assert done.produced[0][0] == "dv.json"
    assert done.produced[0][1].startswith("sha256:")
    assert runtime.calls[0]["command"] == ("sh", "run.sh")
    assert runtime.calls[0]["timeout"] == 12.0
    assert runtime.calls[0]["network"] is False
