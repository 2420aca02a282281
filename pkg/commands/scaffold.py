"""``verdad scaffold``: generate CI configuration and git hooks.

Commit-stage hooks run ``check``; push hooks and CI pipelines run ``run``.
"""
import os
import stat
from pathlib import Path
from typing import Dict

from jinja2 import Environment, FileSystemLoader, StrictUndefined

from commands.common import finish
from utils.config import VERSION, RunConfig
from utils.errors import TargetExists, VerdadError
from utils.logger import logger
from utils.report import RunReport

SCAFFOLD_DIR = Path(__file__).with_name("scaffolds")
KINDS = ("github", "gitlab", "pre-commit", "pre-push")
DEFAULT_TOOL = "verdad"

_TEMPLATES: Dict[str, str] = {
    "github": "github.yml.j2",
    "gitlab": "gitlab-ci.yml.j2",
    "pre-commit": "hook.sh.j2",
    "pre-push": "hook.sh.j2",
}


def scaffold_target(root: Path, kind: str) -> Path:
    if kind == "github":
        return root / ".github" / "workflows" / "verdad.yml"
    if kind == "gitlab":
        return root / ".gitlab-ci.yml"
    hooks = root / ".git" / "hooks" if (root / ".git").is_dir() else root / ".githooks"
    return hooks / kind


def render_scaffold(kind: str, tool: str = DEFAULT_TOOL, out_dir: str = "_verdad") -> str:
    env = Environment(loader=FileSystemLoader(str(SCAFFOLD_DIR)), undefined=StrictUndefined,
                      keep_trailing_newline=True)
    command = "check" if kind == "pre-commit" else "run"
    return env.get_template(_TEMPLATES[kind]).render(
        kind=kind, tool=tool, command=command, version=VERSION, out_dir=out_dir,
    )


def write_scaffold(root: Path, kind: str, tool: str = DEFAULT_TOOL, force: bool = False,
                   out_dir: str = "_verdad") -> Path:
    """Write the file for ``kind`` and return its path.

    Raises:
        TargetExists: the file exists and ``force`` is False.
    """
    target = scaffold_target(root, kind)
    if target.exists() and not force:
        raise TargetExists(f"{target.relative_to(root).as_posix()} already exists (use --force to overwrite)",
                           path=target.relative_to(root).as_posix())
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w", encoding="utf-8", newline="\n") as f:
        f.write(render_scaffold(kind, tool, out_dir))
    if kind in ("pre-commit", "pre-push"):
        os.chmod(target, os.stat(target).st_mode | stat.S_IXUSR | stat.S_IXGRP | stat.S_IXOTH)
    logger.info(f"Wrote {target.relative_to(root).as_posix()}")
    return target


def cmd_scaffold(config: RunConfig, args) -> int:
    report = RunReport("scaffold")
    try:
        out_dir = config.out.relative_to(config.root).as_posix()
    except ValueError:
        out_dir = config.out.as_posix()
    try:
        write_scaffold(config.root, args.kind, getattr(args, "tool", None) or DEFAULT_TOOL,
                       config.force, out_dir)
    except VerdadError as e:
        report.error(e)
    return finish(config, report)


def register(subparsers, parents=()) -> None:
    parser = subparsers.add_parser("scaffold", parents=list(parents), help="generate CI workflows and git hooks")
    parser.add_argument("kind", choices=KINDS, help="what to generate")
    parser.add_argument("--tool", default=DEFAULT_TOOL, help="command used to invoke verdad (default: verdad)")
    parser.set_defaults(handler=cmd_scaffold)


__all__ = ["KINDS", "scaffold_target", "render_scaffold", "write_scaffold", "cmd_scaffold", "register"]
