import hashlib
import json
import shutil
import textwrap
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Union

import pytest

from analysis.runtime import ExecResult
from utils.config import RenderMode, RunConfig, RuntimePolicy

EXAMPLE_PROJECT = Path(__file__).resolve().parent.parent / "data" / "example_mission"


def write_tree(root: Path, files: Dict[str, Union[str, bytes]]) -> Path:
    for relative, content in files.items():
        path = root / relative
        path.parent.mkdir(parents=True, exist_ok=True)
        if isinstance(content, bytes):
            path.write_bytes(content)
        else:
            path.write_text(textwrap.dedent(content), encoding="utf-8")
    return root


@pytest.fixture
def make_project(tmp_path):
    """Write ``{relative path: content}`` under a fresh project root."""
    root = tmp_path / "project"
    root.mkdir()

    def factory(files: Dict[str, Union[str, bytes]]) -> Path:
        return write_tree(root, files)

    return factory


@pytest.fixture
def example_project(tmp_path) -> Path:
    target = tmp_path / "example_mission"
    shutil.copytree(EXAMPLE_PROJECT, target)
    return target


def make_config(root: Path, **overrides) -> RunConfig:
    values = dict(root=Path(root).resolve(), out=Path(root).resolve() / "_verdad",
                  mode=RenderMode.STRICT, runtime=RuntimePolicy.DISABLED, timeout=60.0)
    values.update(overrides)
    return RunConfig(**values)


class FakeRuntime:
    """Stands in for a container engine: runs a Python callable per bundle.

    ``behaviours[name](workdir)`` writes the bundle outputs and returns the
    exit code; bundles without a behaviour succeed without writing anything.
    """

    def __init__(self, behaviours: Optional[Dict[str, Callable[[Path], int]]] = None):
        self.behaviours = behaviours or {}
        self.calls: List[dict] = []

    def run(self, image: str, workdir: Path, command: Optional[Sequence[str]] = None,
            network: bool = False, timeout: Optional[float] = None, name: str = "verdad") -> ExecResult:
        self.calls.append({"image": image, "workdir": Path(workdir), "command": command,
                           "network": network, "timeout": timeout, "name": name})
        behaviour = self.behaviours.get(name)
        code = behaviour(Path(workdir)) if behaviour else 0
        return ExecResult(code, f"{name} finished with {code}\n")


def write_json_output(filename: str, payload: dict) -> Callable[[Path], int]:
    def behaviour(workdir: Path) -> int:
        (workdir / filename).write_text(json.dumps(payload), encoding="utf-8")
        return 0
    return behaviour


@pytest.fixture
def trajectory_runtime() -> FakeRuntime:
    """Runtime producing the example mission's ``dv.json``."""
    return FakeRuntime({
        "trajectory": write_json_output("dv.json", {"total": {"value": 1033.4, "unit": "m/s"}}),
    })


def store_for(root: Path):
    """Store holding every data file under ``root`` and its sidecar annotations."""
    from ingest.annotations import load_sidecar_annotations
    from ingest.namespace import build_namespace
    from storage.store import Store

    store = Store.empty().commit(build_namespace(root))
    return store.attach_annotations(load_sidecar_annotations(root))


def sha256_of(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
