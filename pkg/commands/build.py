"""``verdad build``: check, then render every project template."""
from commands.common import finish, load_project, validated_bundles
from templating.renderer import render_all
from utils.config import RunConfig
from utils.report import RunReport


def cmd_build(config: RunConfig, args=None) -> int:
    report = RunReport("build")
    store = load_project(config, report)
    bundles = validated_bundles(config, report)
    report.bundles = [b.to_report() for b in bundles]
    render_all(config.root, store, config.mode, report, exclude=[config.out], bundles=bundles, out=config.out)
    return finish(config, report, store)


def register(subparsers, parents=()) -> None:
    parser = subparsers.add_parser("build", parents=list(parents), help="render templates next to their sources")
    parser.set_defaults(handler=cmd_build)


__all__ = ["cmd_build", "register"]
