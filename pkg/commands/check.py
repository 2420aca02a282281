"""``verdad check``: validate data, templates and bundles without writing outputs."""
from commands.common import finish, load_project, validated_bundles
from templating.renderer import check_templates
from utils.config import RunConfig
from utils.report import RunReport


def cmd_check(config: RunConfig, args=None) -> int:
    report = RunReport("check")
    store = load_project(config, report)
    bundles = validated_bundles(config, report)
    report.bundles = [b.to_report() for b in bundles]
    check_templates(config.root, store, config.mode, report, exclude=[config.out], bundles=bundles, out=config.out)
    return finish(config, report, store)


def register(subparsers, parents=()) -> None:
    parser = subparsers.add_parser("check", parents=list(parents), help="validate data, templates and bundle manifests")
    parser.set_defaults(handler=cmd_check)


__all__ = ["cmd_check", "register"]
