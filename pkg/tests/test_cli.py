import json
import logging
import os
import stat

import pytest
import yaml

from ingest.namespace import hash_tree
from main import main
from tests.conftest import sha256_of
from utils.logger import Logger, logger


def read_report(root):
    with open(root / "_verdad" / "report.yaml", "r", encoding="utf-8") as f:
        return yaml.safe_load(f)


# ========== arguments ==========

def test_missing_root_is_usage_error(tmp_path):
    assert main(["--root", str(tmp_path / "absent"), "check"]) == 2


@pytest.mark.parametrize("argv", [[], ["check", "--mode", "sloppy"], ["explode"], ["check", "--timeout", "soon"]])
def test_bad_arguments(argv):
    assert main(argv) == 2


def test_global_flags_after_subcommand(example_project):
    assert main(["check", "--root", str(example_project), "--runtime", "disabled"]) == 0
    assert read_report(example_project)["command"] == "check"


# ========== check / build ==========

def test_check_example_reports_pending_analysis(example_project):
    assert main(["--root", str(example_project), "check"]) == 0
    report = read_report(example_project)
    assert report["ok"] is True
    (template,) = report["templates"]
    assert template["source"] == "report.md.j2"
    assert template["status"] == "pending"
    assert "PendingAnalysis" in {w["kind"] for w in report["warnings"]}
    assert [b["name"] for b in report["bundles"]] == ["trajectory"]
    assert not (example_project / "report.md").exists()


def test_check_json_echo(example_project, capsys):
    assert main(["--root", str(example_project), "--json", "check"]) == 0
    echoed = json.loads(capsys.readouterr().out)
    assert echoed["command"] == "check"
    assert echoed == read_report(example_project)


def test_check_fails_on_broken_data(make_project):
    root = make_project({"good.yaml": "a: 1\n", "bad.json": "{nope"})
    assert main(["--root", str(root), "check"]) == 1
    assert read_report(root)["errors"][0]["kind"] == "ParseError"


def test_build_permissive_renders_placeholders(example_project):
    assert main(["--root", str(example_project), "--mode", "permissive", "build"]) == 0
    text = (example_project / "report.md").read_text(encoding="utf-8")
    assert "MISSING(analysis.trajectory.dv.total)" in text
    assert read_report(example_project)["templates"][0]["status"] == "incomplete"


def test_build_never_overwrites_user_data_at_template_target(make_project):
    root = make_project({"mission.yaml": "name: Demo\n", "notes.md.j2": "{{ mission.name }}\n",
                         "notes.md": "# real data\n"})
    before = sha256_of(root / "notes.md")
    assert main(["--root", str(root), "check"]) == 1
    assert main(["--root", str(root), "build"]) == 1
    report = read_report(root)
    assert report["errors"][0]["kind"] == "OutputCollision"
    assert report["templates"][0]["status"] == "failed"
    assert sha256_of(root / "notes.md") == before


def test_rebuild_recognises_its_own_output(example_project):
    argv = ["--root", str(example_project), "--mode", "permissive", "build"]
    assert main(argv) == 0
    first = sha256_of(example_project / "report.md")
    assert main(argv) == 0
    assert sha256_of(example_project / "report.md") == first
    generated = yaml.safe_load((example_project / "_verdad" / "generated.yaml").read_text(encoding="utf-8"))
    assert list(generated) == ["report.md"]


def test_hand_edited_output_is_kept(example_project):
    argv = ["--root", str(example_project), "--mode", "permissive", "build"]
    assert main(argv) == 0
    output = example_project / "report.md"
    output.write_text("# edited by hand\n", encoding="utf-8")
    assert main(argv) == 1
    assert "OutputCollision" in {e["kind"] for e in read_report(example_project)["errors"]}
    assert output.read_text(encoding="utf-8") == "# edited by hand\n"


def test_run_without_runtime_renders_bundles_only(example_project):
    argv = ["--root", str(example_project), "--runtime", "disabled", "--dump-store", "run"]
    assert main(argv) == 0
    report = read_report(example_project)
    assert report["bundles"][0]["status"] == "RenderedOnly"
    assert (example_project / "_verdad" / "bundles" / "trajectory" / "run.sh").is_file()
    store = json.loads((example_project / "_verdad" / "store.json").read_text(encoding="utf-8"))
    assert "propulsion.engine" in store["entries"]


def test_run_with_required_missing_engine_fails(example_project):
    argv = ["--root", str(example_project), "--runtime", "required", "--engine", "verdad-no-such-engine", "run"]
    assert main(argv) == 1
    assert read_report(example_project)["errors"][0]["kind"] == "RuntimeProbeFailed"


def test_custom_output_directory(example_project, tmp_path):
    out = tmp_path / "elsewhere"
    assert main(["--root", str(example_project), "--out", str(out), "check"]) == 0
    assert (out / "report.yaml").is_file()


def test_log_file(example_project, tmp_path):
    log_file = tmp_path / "logs" / "verdad.log"
    try:
        assert main(["--root", str(example_project), "--log-file", str(log_file), "-v", "check"]) == 0
        assert "Loaded" in log_file.read_text(encoding="utf-8")
    finally:
        for handler in list(logger.handlers):
            if isinstance(handler, logging.FileHandler):
                logger.removeHandler(handler)
                handler.close()


def test_verbose_flag_sets_console_level(example_project):
    console = Logger().console_handler
    assert main(["--root", str(example_project), "-v", "check"]) == 0
    assert console.level == logging.DEBUG
    assert main(["--root", str(example_project), "check"]) == 0
    assert console.level == logging.INFO


# ========== scaffold ==========

def test_scaffold_hook_is_executable(make_project):
    root = make_project({"mission.yaml": "name: probe\n"})
    assert main(["--root", str(root), "scaffold", "pre-commit"]) == 0
    hook = root / ".githooks" / "pre-commit"
    assert "exec verdad check --mode strict" in hook.read_text(encoding="utf-8")
    assert os.stat(hook).st_mode & stat.S_IXUSR

    assert main(["--root", str(root), "scaffold", "pre-commit"]) == 1
    assert read_report(root)["errors"][0]["kind"] == "TargetExists"
    assert main(["--root", str(root), "scaffold", "pre-commit", "--force", "--tool", "python -m verdad"]) == 0
    assert "exec python -m verdad check" in hook.read_text(encoding="utf-8")


def test_scaffold_github_and_git_hooks_dir(make_project):
    root = make_project({"mission.yaml": "name: probe\n"})
    (root / ".git" / "hooks").mkdir(parents=True)
    assert main(["--root", str(root), "scaffold", "github"]) == 0
    workflow = yaml.safe_load((root / ".github" / "workflows" / "verdad.yml").read_text(encoding="utf-8"))
    assert workflow["jobs"]["run"]["needs"] == "check"
    assert main(["--root", str(root), "scaffold", "pre-push"]) == 0
    assert "verdad run" in (root / ".git" / "hooks" / "pre-push").read_text(encoding="utf-8")


# ========== annotate / query ==========

def test_annotate_leaves_data_file_untouched(example_project):
    data_file = example_project / "propulsion" / "engine.yaml"
    sidecar = example_project / "propulsion" / "engine.yaml.annotations.yaml"
    before = sha256_of(data_file)
    argv = ["--root", str(example_project), "annotate", "propulsion.engine.isp", "--kind", "issue",
            "--author", "rev2", "--body", "vacuum or sea level?", "--timestamp", "2024-06-01T08:00:00Z"]
    assert main(argv) == 0
    assert sha256_of(data_file) == before
    entries = yaml.safe_load(sidecar.read_text(encoding="utf-8"))
    assert len(entries) == 2
    assert entries[-1]["target"] == "isp"
    assert entries[-1]["kind"] == "issue"


def test_annotate_rejects_unknown_key(example_project):
    argv = ["--root", str(example_project), "annotate", "propulsion.engine.mass", "--kind", "comment",
            "--author", "rev2", "--body", "?"]
    assert main(argv) == 1
    assert read_report(example_project)["errors"][0]["kind"] == "TargetUnresolvable"


def test_query_prints_value_and_provenance(example_project, capsys):
    assert main(["--root", str(example_project), "query", "propulsion.engine.thrust"]) == 0
    described = json.loads(capsys.readouterr().out)
    assert described["value"] == {"type": "Quantity", "value": {"magnitude": 440.0, "unit": "N"}}
    assert described["provenance"]["source_path"] == "propulsion/engine.yaml"
    assert len(described["annotations"]) == 1
    assert [h["version"] for h in described["history"]] == [1]


def test_query_missing_key(example_project, capsys):
    assert main(["--root", str(example_project), "query", "propulsion.engine.mass"]) == 1
    assert capsys.readouterr().out == ""
    assert read_report(example_project)["errors"][0]["kind"] == "NotFound"


def test_check_never_writes_into_the_project(example_project):
    before = hash_tree(example_project, exclude=[example_project / "_verdad"])
    assert main(["--root", str(example_project), "check"]) == 0
    assert hash_tree(example_project, exclude=[example_project / "_verdad"]) == before
