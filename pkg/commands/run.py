"""``verdad run``: execute analysis bundles, then render every template with their outputs."""
from random import Random
from typing import Any, Optional

from analysis.pipeline import run_pipeline
from analysis.runtime import resolve_runtime
from commands.common import finish, load_project
from utils.config import RunConfig
from utils.errors import RuntimeProbeFailed
from utils.report import RunReport


def cmd_run(config: RunConfig, args=None, runtime: Any = None, rng: Optional[Random] = None) -> int:
    """Run the whole pipeline.

    ``runtime`` replaces the probed container engine (tests pass a fake one).
    Templates are rendered once, after the last bundle, so a template that
    waits on analysis data is never reported as pending when the data arrived.
    """
    report = RunReport("run")
    if runtime is None:
        try:
            runtime = resolve_runtime(config.runtime, config.engine)
        except RuntimeProbeFailed as e:
            report.error(e)
            return finish(config, report)

    store = load_project(config, report)
    store = run_pipeline(config.root, store, runtime, config, report, rng=rng)
    return finish(config, report, store)


def register(subparsers, parents=()) -> None:
    parser = subparsers.add_parser("run", parents=list(parents),
                                   help="execute analysis bundles and render templates with their results")
    parser.set_defaults(handler=cmd_run)


__all__ = ["cmd_run", "register"]
