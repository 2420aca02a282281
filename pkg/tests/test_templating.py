import pytest

from analysis.manifest import parse_manifest
from templating.discovery import discover_templates
from templating.renderer import check_templates, create_environment, render, render_all
from tests.conftest import store_for
from utils.config import RenderMode
from utils.errors import DimensionMismatch, MissingKey, OutputCollision, RenderError
from utils.report import RunReport

DATA = {
    "mission.yaml": """\
        name: probe
        launch: {epoch: "2000-01-01T12:00:00", scale: UTC}
        """,
    "propulsion/engine.yaml": "thrust: {value: 440, unit: N}\nmodel: LEROS\n",
    "power/budget.csv": "subsystem,power_w\navionics,45.5\nheater,30\n",
    "notes/intro.md": "---\ntitle: Intro\n---\n**bold** text\n",
}


def render_one(make_project, template: str, mode: RenderMode = RenderMode.STRICT, **extra) -> str:
    root = make_project({**DATA, **extra, "out.txt.j2": template})
    env = create_environment(root, mode)
    (unit,) = discover_templates(root, env=env)
    return render(unit, store_for(root), mode, env)


# ========== rendering ==========

def test_quantities_convert_and_text_ends_with_newline(make_project):
    assert render_one(make_project, "{{ propulsion.engine.thrust | to('kN') }}") == "0.44 kN\n"


def test_epoch_filters(make_project):
    text = render_one(make_project, "{{ mission.launch | iso }}|{{ mission.launch | scale('TDB') }}")
    utc, tdb = text.strip().split("|")
    assert utc == "2000-01-01T12:00:00.000"
    assert tdb.startswith("2000-01-01T12:01:04.18")
    assert tdb.endswith(" TDB")


def test_table_markdown_and_round_filters(make_project):
    text = render_one(make_project, "{{ power.budget | table }}\n{{ notes.intro | markdown }}"
                                    "{{ notes.intro.title }} {{ '2.345 kN' | parse_qty | round(1) }}")
    lines = text.splitlines()
    assert lines[0] == "| subsystem | power_w |"
    assert "| avionics | 45.5 |" in lines
    assert "<strong>bold</strong>" in text
    assert text.rstrip().endswith("Intro 2.3 kN")


def test_dimension_mismatch_fails_the_render(make_project):
    with pytest.raises(RenderError) as info:
        render_one(make_project, "{{ propulsion.engine.thrust | to('s') }}")
    assert isinstance(info.value.cause, DimensionMismatch)


def test_strict_missing_key_raises(make_project):
    with pytest.raises(RenderError) as info:
        render_one(make_project, "{{ propulsion.engine.isp }}")
    assert isinstance(info.value.cause, MissingKey)
    assert info.value.cause.keys == ["propulsion.engine.isp"]


def test_permissive_missing_key_placeholder(make_project):
    text = render_one(make_project, "isp={{ propulsion.engine.isp.value }}", RenderMode.PERMISSIVE)
    assert text == "isp=MISSING(propulsion.engine.isp.value)\n"


def test_provenance_and_annotations_helpers(make_project):
    sidecar = ("- target: thrust\n  kind: question\n  author: rev1\n  body: measured?\n"
               "  timestamp: '2024-05-01T00:00:00Z'\n")
    text = render_one(make_project,
                      "{{ provenance('propulsion.engine.thrust').source_path }}\n"
                      "{% for a in annotations(propulsion.engine) %}{{ a.author }}: {{ a.body }}{% endfor %}",
                      **{"propulsion/engine.yaml.annotations.yaml": sidecar})
    assert text == "propulsion/engine.yaml\nrev1: measured?\n"


def test_map_iteration_yields_names(make_project):
    text = render_one(make_project, "{% for name in propulsion %}{{ name }}{% endfor %}")
    assert text == "engine\n"


# ========== render_all / check ==========

def test_render_all_writes_beside_source(make_project):
    root = make_project({**DATA, "docs/summary.md.j2": "# {{ mission.name }}", "docs/bad.md.j2": "{{ nope.x }}"})
    report = RunReport("build")
    entries = render_all(root, store_for(root), RenderMode.STRICT, report)
    assert (root / "docs" / "summary.md").read_text(encoding="utf-8") == "# probe\n"
    assert not (root / "docs" / "bad.md").exists()
    statuses = {e["source"]: e["status"] for e in entries}
    assert statuses == {"docs/bad.md.j2": "skipped-incomplete", "docs/summary.md.j2": "rendered"}
    assert [e["kind"] for e in report.errors] == ["MissingKey"]


def test_permissive_render_all_marks_incomplete(make_project):
    root = make_project({**DATA, "a.md.j2": "{{ nope.x }}"})
    report = RunReport("build")
    entries = render_all(root, store_for(root), RenderMode.PERMISSIVE, report)
    assert entries[0]["status"] == "incomplete"
    assert report.ok
    assert (root / "a.md").read_text(encoding="utf-8") == "MISSING(nope.x)\n"


def test_output_collision(make_project):
    root = make_project({**DATA, "a.md.j2": "x", "a.md.jinja": "y"})
    with pytest.raises(OutputCollision):
        discover_templates(root)
    report = RunReport("build")
    assert render_all(root, store_for(root), RenderMode.STRICT, report) == []
    assert report.errors[0]["kind"] == "OutputCollision"


def test_dynamic_lookup_is_strict_error_and_permissive_warning(make_project):
    root = make_project({**DATA, "a.md.j2": "{% set k = 'name' %}{{ mission[k] }}"})
    strict = RunReport("check")
    check_templates(root, store_for(root), RenderMode.STRICT, strict)
    assert [e["kind"] for e in strict.errors] == ["DynamicLookup"]
    permissive = RunReport("check")
    entries = render_all(root, store_for(root), RenderMode.PERMISSIVE, permissive)
    assert permissive.ok
    assert [w["kind"] for w in permissive.warnings] == ["DynamicLookup"]
    assert entries[0]["status"] == "rendered"
    assert (root / "a.md").read_text(encoding="utf-8") == "probe\n"


def test_keys_from_declared_outputs_are_pending(make_project):
    root = make_project({**DATA, "a.md.j2": "{{ analysis.trajectory.dv.total }}"})
    bundle = parse_manifest({"name": "trajectory", "image": "busybox", "outputs": ["dv.json"]}, "t.analysis")
    report = RunReport("check")
    entries = check_templates(root, store_for(root), RenderMode.STRICT, report, bundles=[bundle])
    assert entries[0]["status"] == "pending"
    assert entries[0]["pending"] == {"analysis.trajectory.dv.total": "trajectory"}
    assert report.ok
    assert [w["kind"] for w in report.warnings] == ["PendingAnalysis"]


def test_syntax_error_is_recorded_and_others_render(make_project):
    root = make_project({**DATA, "a.md.j2": "{% if %}", "b.md.j2": "{{ mission.name }}"})
    report = RunReport("build")
    entries = render_all(root, store_for(root), RenderMode.STRICT, report)
    assert [(e["source"], e["status"]) for e in entries] == [("a.md.j2", "failed"), ("b.md.j2", "rendered")]
    assert report.errors[0]["kind"] == "TemplateSyntaxError"


def test_data_named_like_a_global_is_checked_and_rendered(make_project):
    template = "{{ range.max }} {{ provenance.owner }}"
    root = make_project({**DATA, "a.md.j2": template + "{{ range(2) | list | length }}"})
    report = RunReport("check")
    entries = check_templates(root, store_for(root), RenderMode.STRICT, report)
    assert entries[0]["missing"] == ["provenance.owner", "range.max"]
    assert [e["kind"] for e in report.errors] == ["MissingKey"]

    root = make_project({**DATA, "range.yaml": "max: {value: 5, unit: km}\n", "provenance.yaml": "owner: ops\n",
                         "a.md.j2": template})
    report = RunReport("build")
    entries = render_all(root, store_for(root), RenderMode.STRICT, report)
    assert report.ok, report.errors
    assert entries[0]["status"] == "rendered"
    assert (root / "a.md").read_text(encoding="utf-8") == "5.0 km ops\n"
    assert [w["key"] for w in report.warnings if w["kind"] == "ShadowedGlobal"] == ["provenance", "range"]
