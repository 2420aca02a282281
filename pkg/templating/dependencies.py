"""Static extraction of the store keys a template reads.

The template is parsed into a Jinja2 syntax tree and every expression rooted
at a context variable is turned into a key path. The result may contain
more keys than a render actually reads but never fewer:

* attribute and constant subscripts extend the path
  (``propulsion.engine["thrust"]`` -> ``propulsion.engine.thrust``);
* method calls drop the method name (``power.items()`` -> ``power``);
* names bound inside the template (loop targets, ``set``, macro arguments,
  imports) are not store keys; a loop contributes its source expression;
* a subscript computed at render time records its base path and a lint
  finding, since the full key cannot be known before rendering;
* a direct call of a renderer global (``range(3)``) reads nothing, but any
  other use of such a name is a store key, as is ``loop`` outside a loop;
* included templates are analysed with the including scope.
"""
from dataclasses import dataclass, field
from typing import FrozenSet, Iterable, List, Optional, Set, Tuple

from jinja2 import Environment, TemplateNotFound, nodes
from jinja2 import TemplateSyntaxError as JinjaSyntaxError
from jinja2.loaders import BaseLoader

from datamodel.records import SEPARATOR, KeyPath
from utils.errors import TemplateSyntaxError

Path_ = Tuple[str, ...]

# Globals the renderer provides. Top-level data of the same name takes
# precedence, so only a direct call of one of these is not a store read.
GLOBAL_NAMES = frozenset((
    "range", "dict", "lipsum", "cycler", "joiner", "namespace", "provenance", "annotations",
))
# Always bound by Jinja itself; a store key of this name is unreachable.
TEMPLATE_REFERENCE = "self"


@dataclass
class DependencyReport:
    dependencies: Set[KeyPath] = field(default_factory=set)
    # (base key or "", line) for lookups whose key is only known at render time
    dynamic: List[Tuple[str, int]] = field(default_factory=list)
    includes: List[str] = field(default_factory=list)


class _Analyzer:
    def __init__(self, env: Environment, loader: Optional[BaseLoader], report: DependencyReport,
                 visited: Set[str]):
        self.env = env
        self.loader = loader
        self.report = report
        self.visited = visited
        self.scopes: List[Set[str]] = [set()]

    # ---------- scopes ----------

    def is_local(self, name: str) -> bool:
        return name == TEMPLATE_REFERENCE or any(name in scope for scope in self.scopes)

    def bind(self, target: nodes.Node) -> None:
        for name_node in target.find_all(nodes.Name):
            self.scopes[-1].add(name_node.name)
        if isinstance(target, nodes.Name):
            self.scopes[-1].add(target.name)

    def push(self, names: Iterable[str] = ()) -> None:
        self.scopes.append(set(names))

    def pop(self) -> None:
        self.scopes.pop()

    # ---------- expressions ----------

    def add(self, path: Path_) -> None:
        self.report.dependencies.add(KeyPath(path))

    def path_of(self, node: nodes.Node) -> Optional[Path_]:
        """Key path of a pure attribute/constant-subscript chain, else None."""
        if isinstance(node, nodes.Name):
            if node.ctx != "load" or self.is_local(node.name) or SEPARATOR in node.name:
                return None
            return (node.name,)
        if isinstance(node, nodes.Getattr):
            base = self.path_of(node.node)
            if base is not None and node.attr and SEPARATOR not in node.attr:
                return base + (node.attr,)
            return None
        if isinstance(node, nodes.Getitem):
            base = self.path_of(node.node)
            arg = node.arg
            if base is not None and isinstance(arg, nodes.Const) and isinstance(arg.value, (str, int)) \
                    and not isinstance(arg.value, bool):
                segment = str(arg.value)
                if segment and SEPARATOR not in segment:
                    return base + (segment,)
            return None
        return None

    def root_path(self, node: nodes.Node) -> Optional[Path_]:
        """Longest leading chain of ``node`` that is a key path."""
        while True:
            path = self.path_of(node)
            if path is not None:
                return path
            if isinstance(node, (nodes.Getattr, nodes.Getitem)):
                node = node.node
                continue
            return None

    def expr(self, node: Optional[nodes.Node]) -> None:
        if node is None:
            return
        if isinstance(node, (nodes.Name, nodes.Getattr, nodes.Getitem)):
            path = self.path_of(node)
            if path is not None:
                self.add(path)
                return
            if isinstance(node, nodes.Getitem):
                base = self.root_path(node.node)
                if base is not None:
                    self.add(base)
                    if not isinstance(node.arg, (nodes.Const, nodes.Slice)):
                        self.report.dynamic.append((".".join(base), node.lineno))
                else:
                    self.expr(node.node)
                self.expr(node.arg)
                return
            if isinstance(node, nodes.Getattr):
                self.expr(node.node)
            return
        if isinstance(node, nodes.Call):
            callee = node.node
            if isinstance(callee, nodes.Getattr):
                base = self.path_of(callee.node)
                if base is not None:
                    self.add(base)
                else:
                    self.expr(callee.node)
            elif not (isinstance(callee, nodes.Name) and callee.name in GLOBAL_NAMES):
                self.expr(callee)
            self.call_args(node)
            return
        if isinstance(node, nodes.Filter):
            self.expr(node.node)
            self.call_args(node)
            if node.name == "attr" and node.args and not isinstance(node.args[0], nodes.Const):
                base = self.root_path(node.node) if node.node is not None else None
                self.report.dynamic.append((".".join(base) if base else "", node.lineno))
            return
        for child in node.iter_child_nodes():
            self.expr(child)

    def call_args(self, node: nodes.Node) -> None:
        for arg in node.args:
            self.expr(arg)
        for kwarg in node.kwargs:
            self.expr(kwarg.value)
        self.expr(getattr(node, "dyn_args", None))
        self.expr(getattr(node, "dyn_kwargs", None))

    # ---------- statements ----------

    def body(self, statements: Iterable[nodes.Node]) -> None:
        for statement in statements:
            self.stmt(statement)

    def stmt(self, node: nodes.Node) -> None:
        if isinstance(node, nodes.Output):
            for child in node.nodes:
                if not isinstance(child, nodes.TemplateData):
                    self.expr(child)
        elif isinstance(node, nodes.For):
            self.expr(node.iter)
            self.push(["loop"])
            self.bind(node.target)
            self.expr(node.test)
            self.body(node.body)
            self.pop()
            self.body(node.else_)
        elif isinstance(node, nodes.If):
            self.expr(node.test)
            self.body(node.body)
            for elif_ in node.elif_:
                self.stmt(elif_)
            self.body(node.else_)
        elif isinstance(node, nodes.Assign):
            self.expr(node.node)
            self.bind_target(node.target)
        elif isinstance(node, nodes.AssignBlock):
            self.expr(node.filter)
            self.body(node.body)
            self.bind_target(node.target)
        elif isinstance(node, nodes.Macro):
            self.scopes[-1].add(node.name)
            for default in node.defaults:
                self.expr(default)
            self.push(["caller", "varargs", "kwargs"])
            for arg in node.args:
                self.bind(arg)
            self.body(node.body)
            self.pop()
        elif isinstance(node, nodes.CallBlock):
            self.expr(node.call)
            for default in node.defaults:
                self.expr(default)
            self.push()
            for arg in node.args:
                self.bind(arg)
            self.body(node.body)
            self.pop()
        elif isinstance(node, nodes.FilterBlock):
            self.expr(node.filter)
            self.body(node.body)
        elif isinstance(node, nodes.With):
            for value in node.values:
                self.expr(value)
            self.push()
            for target in node.targets:
                self.bind(target)
            self.body(node.body)
            self.pop()
        elif isinstance(node, nodes.Include):
            self.include(node.template, node.lineno)
        elif isinstance(node, nodes.Import):
            self.include(node.template, node.lineno)
            self.scopes[-1].add(node.target)
        elif isinstance(node, nodes.FromImport):
            self.include(node.template, node.lineno)
            for name in node.names:
                self.scopes[-1].add(name[1] if isinstance(name, tuple) else name)
        elif isinstance(node, nodes.Extends):
            self.include(node.template, node.lineno)
        elif isinstance(node, (nodes.Block, nodes.Scope, nodes.ScopedEvalContextModifier)):
            for option in getattr(node, "options", ()):
                self.expr(option.value)
            self.push(["super"] if isinstance(node, nodes.Block) else ())
            self.body(node.body)
            self.pop()
        elif isinstance(node, nodes.ExprStmt):
            self.expr(node.node)
        else:
            for child in node.iter_child_nodes():
                if isinstance(child, nodes.Stmt):
                    self.stmt(child)
                else:
                    self.expr(child)

    def bind_target(self, target: nodes.Node) -> None:
        if isinstance(target, nodes.NSRef):
            return
        self.bind(target)

    def include(self, template: nodes.Node, lineno: int) -> None:
        names: List[str] = []
        if isinstance(template, nodes.Const) and isinstance(template.value, str):
            names = [template.value]
        elif isinstance(template, (nodes.List, nodes.Tuple)) and all(
                isinstance(item, nodes.Const) for item in template.items):
            names = [item.value for item in template.items]
        else:
            self.expr(template)
            self.report.dynamic.append(("", lineno))
            return
        for name in names:
            self.report.includes.append(name)
            if self.loader is None or name in self.visited:
                continue
            self.visited.add(name)
            try:
                source, _, _ = self.loader.get_source(self.env, name)
            except TemplateNotFound:
                continue
            tree = _parse(self.env, source, name)
            self.push(set().union(*self.scopes))
            self.body(tree.body)
            self.pop()


def _parse(env: Environment, body: str, name: Optional[str]) -> nodes.Template:
    try:
        return env.parse(body, name=name)
    except JinjaSyntaxError as e:
        raise TemplateSyntaxError(name or "<template>", e.message or str(e), line=e.lineno) from None


def analyze_template(body: str, loader: Optional[BaseLoader] = None, name: Optional[str] = None,
                     env: Optional[Environment] = None) -> DependencyReport:
    """Dependencies, dynamic lookups and includes of one template body.

    Raises:
        TemplateSyntaxError: the body (or an included template) does not parse.
    """
    env = env or Environment(loader=loader)
    report = DependencyReport()
    visited = {name} if name else set()
    analyzer = _Analyzer(env, loader, report, visited)
    analyzer.body(_parse(env, body, name).body)
    return report


def extract_dependencies(body: str, loader: Optional[BaseLoader] = None,
                         name: Optional[str] = None) -> FrozenSet[KeyPath]:
    """Every root-anchored key path ``body`` may read at render time."""
    return frozenset(analyze_template(body, loader, name).dependencies)


__all__ = ["DependencyReport", "analyze_template", "extract_dependencies", "GLOBAL_NAMES", "TEMPLATE_REFERENCE"]
