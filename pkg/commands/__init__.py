"""CLI subcommands; each module contributes ``register(subparsers, parents)``."""
from commands import annotate, build, check, query, run, scaffold


def register_commands(subparsers, parents=()) -> None:
    """Attach every subcommand parser.

    ``parents`` carry the global options so they are also accepted after the
    subcommand name.
    """
    for module in (check, build, run, scaffold, annotate, query):
        module.register(subparsers, parents)


__all__ = ["register_commands"]
