"""Render templates against a store.

Templates see every top-level namespace name as a variable. Lookups are
resolved lazily through :class:`StoreView`, so a template only touches the
keys it actually reads, and those reads can be recorded.
"""
import re
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path, PurePosixPath
from typing import Any, Dict, Iterable, Iterator, List, Mapping, NamedTuple, Optional, Tuple

from jinja2 import Environment, FileSystemLoader, StrictUndefined, Undefined, UndefinedError
from jinja2 import TemplateSyntaxError as JinjaSyntaxError

from datamodel.records import SEPARATOR, KeyPath
from datamodel.value import Markdown, Table, ValueMap, descend, render_text
from ingest.namespace import content_hash, is_generated, key_for, read_generated, write_generated
from storage.store import ANALYSIS_ROOT, Store
from templating.dependencies import GLOBAL_NAMES
from templating.discovery import TemplateUnit, discover_templates
from templating.filters import FILTERS
from utils.config import DEFAULT_OUTPUT_DIR, RenderMode
from utils.errors import (DynamicLookup, InvalidKeySegment, InvalidValue, MissingKey, NotFound, OutputCollision,
                          RenderError, TemplateSyntaxError, VerdadError)
from utils.logger import logger

MAX_WORKERS = 8

_VIEW_METHODS = frozenset(("items", "keys", "values", "get"))
_DESCENDABLE = (ValueMap, tuple, Table, Markdown)
_UNDEFINED_NAME = re.compile(r"'(.+?)' is undefined")


# ========== lazy store access ==========

class StoreView(Mapping[str, Any]):
    """A Map-valued key of the store, read on demand."""

    __slots__ = ("path", "store", "env", "recorder")

    def __init__(self, path: KeyPath, store: Store, env: Environment, recorder: Optional[List[KeyPath]] = None):
        self.path = path
        self.store = store
        self.env = env
        self.recorder = recorder

    @property
    def value(self) -> Any:
        return self.store.get(self.path)

    def _wrap(self, key: KeyPath, value: Any) -> Any:
        if isinstance(value, ValueMap):
            return StoreView(key, self.store, self.env, self.recorder)
        return value

    def has(self, segment: str) -> bool:
        try:
            return self.store.has(self.path.child(segment))
        except InvalidKeySegment:
            return False

    def child(self, segment: Any) -> Any:
        segment = str(segment)
        if not segment or SEPARATOR in segment:
            return self.env.undefined(name=f"{self.path}{SEPARATOR}{segment}")
        key = self.path.child(segment)
        if self.recorder is not None:
            self.recorder.append(key)
        try:
            value = self.store.get(key)
        except NotFound:
            return self.env.undefined(name=str(key))
        return self._wrap(key, value)

    def __getitem__(self, segment: str) -> Any:
        try:
            key = self.path.child(str(segment))
            return self._wrap(key, self.store.get(key))
        except (NotFound, InvalidKeySegment):
            raise KeyError(segment) from None

    def __iter__(self) -> Iterator[str]:
        return iter(self.value)

    def __len__(self) -> int:
        return len(self.value)

    def __str__(self) -> str:
        return render_text(self.value)

    def __repr__(self) -> str:
        return f"StoreView({self.path})"


class MissingUndefined(Undefined):
    """Permissive-mode undefined: renders ``MISSING(<full key>)``."""

    __slots__ = ()

    def _child(self, segment: Any) -> "MissingUndefined":
        base = self._undefined_name or "?"
        return MissingUndefined(name=f"{base}{SEPARATOR}{segment}")

    def __getattr__(self, name: str) -> Any:
        if name[:2] == "__":
            raise AttributeError(name)
        return self._child(name)

    def __getitem__(self, key: Any) -> "MissingUndefined":
        return self._child(key)

    def __str__(self) -> str:
        return f"MISSING({self._undefined_name or '?'})"


class StoreEnvironment(Environment):
    """Jinja environment whose attribute and item lookups follow key descent."""

    def getattr(self, obj: Any, attribute: str) -> Any:
        if isinstance(obj, StoreView):
            if attribute in _VIEW_METHODS and not obj.has(attribute):
                return getattr(obj, attribute)
            return obj.child(attribute)
        if isinstance(obj, _DESCENDABLE):
            try:
                return descend(obj, attribute)
            except KeyError:
                pass
        return super().getattr(obj, attribute)

    def getitem(self, obj: Any, argument: Any) -> Any:
        is_segment = isinstance(argument, (str, int)) and not isinstance(argument, bool)
        if isinstance(obj, StoreView) and is_segment:
            return obj.child(argument)
        if isinstance(obj, _DESCENDABLE) and is_segment:
            try:
                return descend(obj, str(argument))
            except KeyError:
                pass
        return super().getitem(obj, argument)


def _finalize(value: Any) -> Any:
    if isinstance(value, Undefined):
        return value
    if isinstance(value, StoreView):
        return render_text(value.value)
    return render_text(value)


def create_environment(root: Path, mode: RenderMode = RenderMode.STRICT) -> StoreEnvironment:
    env = StoreEnvironment(
        loader=FileSystemLoader(str(root)),
        undefined=StrictUndefined if RenderMode(mode) == RenderMode.STRICT else MissingUndefined,
        finalize=_finalize,
        keep_trailing_newline=True,
        autoescape=False,
    )
    env.filters.update(FILTERS)
    return env


def _key_argument(key: Any) -> KeyPath:
    if isinstance(key, StoreView):
        return key.path
    if isinstance(key, (str, KeyPath)):
        return KeyPath.parse(key)
    raise InvalidValue(f"expected a key or a namespace node, got {type(key).__name__}")


def build_context(store: Store, env: Environment, recorder: Optional[List[KeyPath]] = None) -> Dict[str, Any]:
    context: Dict[str, Any] = {}
    for name in store.top_level_names():
        key = KeyPath.of(name)
        value = store.get(key)
        context[name] = StoreView(key, store, env, recorder) if isinstance(value, ValueMap) else value
    # data of the same name keeps precedence over the helpers
    context.setdefault("provenance", lambda key: store.provenance(_key_argument(key)))
    context.setdefault("annotations", lambda key: store.annotations_for(_key_argument(key)))
    return context


# ========== completeness ==========

def resolves(store: Store, key: KeyPath) -> bool:
    """True if ``key`` resolves, or names a public attribute of the value it stops at.

    A bare renderer global (``range``) always resolves, to the data of that
    name if there is any and to the global otherwise.
    """
    if len(key) == 1 and key.head in GLOBAL_NAMES:
        return True
    try:
        store.get(key)
        return True
    except NotFound as e:
        if not e.nearest:
            return False
        nearest = KeyPath.parse(e.nearest)
        attribute = key.relative_to(nearest)[0]
        return not attribute.startswith("_") and hasattr(store.get(nearest), attribute)


def declared_outputs(bundles: Iterable[Any]) -> Dict[KeyPath, str]:
    """Key prefix of every declared bundle output, mapped to the bundle name."""
    prefixes: Dict[KeyPath, str] = {}
    for bundle in bundles:
        for output in bundle.outputs:
            try:
                relative = key_for(output)
            except InvalidKeySegment:
                continue
            prefixes[KeyPath.of(ANALYSIS_ROOT, bundle.name).child(*relative.segments)] = bundle.name
    return prefixes


class Completeness(NamedTuple):
    unit: TemplateUnit
    missing: Tuple[KeyPath, ...]
    # missing keys that a declared bundle output would provide
    pending: Dict[str, str]

    @property
    def status(self) -> str:
        if self.missing:
            return "incomplete"
        if self.pending:
            return "pending"
        return "complete"


def check_completeness(units: Iterable[TemplateUnit], store: Store,
                       bundles: Iterable[Any] = ()) -> List[Completeness]:
    """Unresolvable dependencies of every unit, split into missing and pending."""
    producers = declared_outputs(bundles)
    results = []
    for unit in units:
        missing, pending = [], {}
        for key in sorted(unit.dependencies):
            if resolves(store, key):
                continue
            producer = next((name for prefix, name in producers.items()
                             if key.startswith(prefix) or prefix.startswith(key)), None)
            if producer is not None:
                pending[str(key)] = producer
            else:
                missing.append(key)
        results.append(Completeness(unit, tuple(missing), pending))
    return results


# ========== rendering ==========

def render(unit: TemplateUnit, store: Store, mode: RenderMode = RenderMode.STRICT,
           env: Optional[Environment] = None, recorder: Optional[List[KeyPath]] = None) -> str:
    """Render one unit; the text always ends with a newline.

    Raises:
        RenderError: wrapping MissingKey, DimensionMismatch or any other
            failure raised while rendering.
        TemplateSyntaxError: the template (or an include) does not parse.
    """
    if env is None:
        root = unit.source_path.parents[len(PurePosixPath(unit.relative).parts) - 1]
        env = create_environment(root, mode)
    try:
        template = env.get_template(unit.relative)
        text = template.render(build_context(store, env, recorder))
    except JinjaSyntaxError as e:
        raise TemplateSyntaxError(e.name or unit.relative, e.message or str(e), line=e.lineno) from None
    except UndefinedError as e:
        match = _UNDEFINED_NAME.search(str(e))
        raise RenderError(unit.relative, MissingKey(unit.relative, [match.group(1) if match else str(e)])) from e
    except VerdadError as e:
        raise RenderError(unit.relative, e) from e
    except Exception as e:
        raise RenderError(unit.relative, e) from e
    if not text.endswith("\n"):
        text += "\n"
    return text


class TemplatePlan(NamedTuple):
    unit: TemplateUnit
    entry: Dict[str, Any]
    renderable: bool


def plan_templates(units: Iterable[TemplateUnit], store: Store, mode: RenderMode, report,
                   bundles: Iterable[Any] = (), generated: Optional[Mapping[str, str]] = None) -> List[TemplatePlan]:
    """Check every unit, record findings in ``report`` and decide what renders.

    Strict mode renders only complete units; missing keys are errors and
    pending analysis keys are warnings. Permissive mode renders everything
    that parses, with ``MISSING(key)`` placeholders.
    """
    strict = RenderMode(mode) == RenderMode.STRICT
    units = list(units)
    for name in sorted(GLOBAL_NAMES.intersection(store.top_level_names())):
        report.warning("ShadowedGlobal", f"top-level key '{name}' hides the template global of the same name",
                       key=name)
    plans = []
    for result in check_completeness([u for u in units if u.ok], store, bundles):
        unit = result.unit
        entry: Dict[str, Any] = {"source": unit.relative, "output": unit.output_relative, "status": result.status}
        if result.missing:
            entry["missing"] = [str(k) for k in result.missing]
        if result.pending:
            entry["pending"] = dict(result.pending)

        if (generated is not None and unit.output_path.exists()
                and not is_generated(unit.output_path, unit.output_relative, generated)):
            collision = OutputCollision(unit.output_relative, [unit.relative], existing=True)
            report.error(collision)
            entry.update(status="failed", error=collision.message)
            plans.append(TemplatePlan(unit, entry, False))
            continue

        renderable = True
        for base, line in unit.dynamic:
            lint = DynamicLookup(unit.relative, base, line)
            if strict:
                report.error(lint)
                entry["status"] = "failed"
                entry["error"] = lint.message
                renderable = False
            else:
                report.warning("DynamicLookup", lint.message, path=unit.relative, base=base, line=line)
        if result.missing:
            if strict:
                report.error(MissingKey(unit.relative, result.missing))
                renderable = False
            else:
                report.warning("IncompleteTemplate",
                               f"{unit.relative} rendered with placeholders for "
                               f"{', '.join(str(k) for k in result.missing)}", path=unit.relative)
        if result.pending:
            waits = ", ".join(f"{k} (bundle {b})" for k, b in result.pending.items())
            report.warning("PendingAnalysis", f"{unit.relative} waits for analysis outputs: {waits}",
                           path=unit.relative)
            if strict:
                renderable = False
        plans.append(TemplatePlan(unit, entry, renderable))

    for unit in units:
        if not unit.ok:
            report.error(unit.syntax_error)
            plans.append(TemplatePlan(unit, {"source": unit.relative, "output": unit.output_relative,
                                             "status": "failed", "error": unit.syntax_error.message}, False))
    plans.sort(key=lambda p: p.unit.relative)
    return plans


def check_templates(root: Path, store: Store, mode: RenderMode, report, *, exclude: Iterable[Path] = (),
                    bundles: Iterable[Any] = (), out: Optional[Path] = None) -> List[Dict[str, Any]]:
    """Discover and check templates without writing anything."""
    root = Path(root).resolve()
    generated = read_generated(Path(out) if out else root / DEFAULT_OUTPUT_DIR)
    units = discover_templates(root, exclude=exclude, report=report)
    entries = [plan.entry for plan in plan_templates(units, store, mode, report, bundles, generated)]
    report.templates = entries
    return entries


def _render_safe(unit: TemplateUnit, store: Store, mode: RenderMode,
                 env: Environment) -> Tuple[Optional[str], Optional[VerdadError]]:
    try:
        return render(unit, store, mode, env), None
    except (RenderError, TemplateSyntaxError) as e:
        return None, e


def write_output(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


def render_all(root: Path, store: Store, mode: RenderMode, report, *, exclude: Iterable[Path] = (),
               bundles: Iterable[Any] = (), out: Optional[Path] = None) -> List[Dict[str, Any]]:
    """Discover, check, render and write every template under ``root``.

    Outputs are written beside their sources. One failing template does not
    stop the others; its entry is marked ``failed`` and the error recorded.
    Every written output is recorded in ``<out>/generated.yaml``; an existing
    file missing from that record is never overwritten.
    """
    root = Path(root).resolve()
    mode = RenderMode(mode)
    out = Path(out) if out else root / DEFAULT_OUTPUT_DIR
    generated = read_generated(out)
    env = create_environment(root, mode)
    units = discover_templates(root, exclude=exclude, env=env, report=report)
    plans = plan_templates(units, store, mode, report, bundles, generated)

    todo = [p for p in plans if p.renderable]
    results: List[Tuple[Optional[str], Optional[VerdadError]]] = []
    if todo:
        with ThreadPoolExecutor(max_workers=min(MAX_WORKERS, len(todo))) as pool:
            results = list(pool.map(lambda p: _render_safe(p.unit, store, mode, env), todo))

    for plan, (text, error) in zip(todo, results):
        if error is not None:
            report.error(error)
            plan.entry["status"] = "failed"
            plan.entry["error"] = error.message
            continue
        write_output(plan.unit.output_path, text)
        generated[plan.unit.output_relative] = content_hash(plan.unit.output_path.read_bytes())
        plan.entry["status"] = "incomplete" if (plan.entry.get("missing") or plan.entry.get("pending")) else "rendered"
        logger.info(f"Rendered {plan.unit.relative} -> {plan.unit.output_relative}")
    for plan in plans:
        if not plan.renderable and plan.entry["status"] == "incomplete":
            plan.entry["status"] = "skipped-incomplete"
    if todo:
        write_generated(out, generated)

    entries = [plan.entry for plan in plans]
    report.templates = entries
    return entries


__all__ = [
    "StoreView",
    "StoreEnvironment",
    "MissingUndefined",
    "Completeness",
    "create_environment",
    "build_context",
    "resolves",
    "declared_outputs",
    "check_completeness",
    "render",
    "plan_templates",
    "check_templates",
    "render_all",
    "write_output",
]
