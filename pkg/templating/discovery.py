"""Find template files in a project tree."""
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple

from jinja2 import Environment, FileSystemLoader

from datamodel.records import KeyPath
from ingest.formats import ANALYSIS_SUFFIX, is_template, strip_template_extension
from templating.dependencies import analyze_template
from utils.config import DEFAULT_OUTPUT_DIR
from utils.errors import OutputCollision, TemplateSyntaxError
from utils.logger import logger


@dataclass(frozen=True)
class TemplateUnit:
    source_path: Path
    output_path: Path
    relative: str
    output_relative: str
    body: str
    dependencies: FrozenSet[KeyPath] = frozenset()
    dynamic: Tuple[Tuple[str, int], ...] = ()
    syntax_error: Optional[TemplateSyntaxError] = field(default=None, compare=False)

    @property
    def ok(self) -> bool:
        return self.syntax_error is None


def _template_paths(root: Path, excluded: Iterable[Path]) -> List[Path]:
    excluded = {Path(p).resolve() for p in excluded}
    found: List[Path] = []
    for dirpath, dirnames, filenames in os.walk(root):
        current = Path(dirpath)
        dirnames[:] = sorted(
            d for d in dirnames
            if not d.startswith(".")
            and not d.endswith(ANALYSIS_SUFFIX)
            and (current / d).resolve() not in excluded
        )
        found.extend(current / name for name in sorted(filenames)
                     if not name.startswith(".") and is_template(name))
    return sorted(found, key=lambda p: p.relative_to(root).as_posix())


def make_unit(root: Path, path: Path, env: Environment) -> TemplateUnit:
    """Read one template and statically extract its dependencies."""
    relative = path.relative_to(root).as_posix()
    output = strip_template_extension(path)
    body = path.read_text(encoding="utf-8")
    try:
        deps = analyze_template(body, env.loader, relative, env)
    except TemplateSyntaxError as e:
        return TemplateUnit(path, output, relative, output.relative_to(root).as_posix(), body, syntax_error=e)
    return TemplateUnit(path, output, relative, output.relative_to(root).as_posix(), body,
                        frozenset(deps.dependencies), tuple(deps.dynamic))


def discover_templates(root: Path, *, exclude: Iterable[Path] = (),
                       env: Optional[Environment] = None, report=None) -> List[TemplateUnit]:
    """Every ``.j2``/``.jinja`` file under ``root``, sorted by relative path.

    Directories ending in ``.analysis`` are left to the analysis module unless
    ``root`` is itself the bundle. A syntax error does not stop discovery; it
    is kept on the unit.

    Raises:
        OutputCollision: two templates render to the same output (only when
            ``report`` is None; otherwise recorded and both dropped).
    """
    root = Path(root).resolve()
    env = env or Environment(loader=FileSystemLoader(str(root)))
    units = [make_unit(root, path, env)
             for path in _template_paths(root, [root / DEFAULT_OUTPUT_DIR, *exclude])]

    by_output: Dict[str, List[TemplateUnit]] = {}
    for unit in units:
        by_output.setdefault(unit.output_relative, []).append(unit)
    result = []
    for unit in units:
        clashing = by_output[unit.output_relative]
        if len(clashing) > 1:
            if clashing[0] is unit:
                error = OutputCollision(unit.output_relative, [u.relative for u in clashing])
                if report is None:
                    raise error
                report.error(error)
            continue
        result.append(unit)
    logger.debug(f"Discovered {len(result)} templates under {root}")
    return result


__all__ = ["TemplateUnit", "discover_templates", "make_unit"]
