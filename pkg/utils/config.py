"""Run configuration for one CLI invocation."""
import os
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

from dotenv import dotenv_values

VERSION = "0.1.0"
DEFAULT_OUTPUT_DIR = "_verdad"
DEFAULT_ENGINE = "docker"
DEFAULT_TIMEOUT = 15 * 60


class RenderMode(str, Enum):
    STRICT = "strict"
    PERMISSIVE = "permissive"


class RuntimePolicy(str, Enum):
    AUTO = "auto"
    REQUIRED = "required"
    DISABLED = "disabled"


@dataclass(frozen=True)
class RunConfig:
    root: Path
    out: Path
    mode: RenderMode = RenderMode.STRICT
    runtime: RuntimePolicy = RuntimePolicy.AUTO
    timeout: float = DEFAULT_TIMEOUT
    dump_store: bool = False
    json: bool = False
    force: bool = False
    engine: str = DEFAULT_ENGINE
    network: bool = False
    verbose: bool = False
    log_file: Optional[Path] = None

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        """Build a config from parsed argparse arguments.

        Flags win over ``VERDAD_*`` variables, which are read from the process
        environment first and from ``<root>/.env`` second.
        """
        root = Path(getattr(args, "root", ".") or ".").resolve()
        env = _environment(root)

        out_arg = getattr(args, "out", None)
        out = Path(out_arg).resolve() if out_arg else root / DEFAULT_OUTPUT_DIR

        mode = getattr(args, "mode", None) or env.get("VERDAD_MODE") or RenderMode.STRICT.value
        timeout = getattr(args, "timeout", None)
        if timeout is None:
            timeout = float(env.get("VERDAD_TIMEOUT") or DEFAULT_TIMEOUT)
        log_file = getattr(args, "log_file", None)

        return cls(
            root=root,
            out=out.resolve(),
            mode=RenderMode(mode),
            runtime=RuntimePolicy(getattr(args, "runtime", None) or RuntimePolicy.AUTO.value),
            timeout=float(timeout),
            dump_store=bool(getattr(args, "dump_store", False)),
            json=bool(getattr(args, "json", False)),
            force=bool(getattr(args, "force", False)),
            engine=getattr(args, "engine", None) or env.get("VERDAD_CONTAINER_ENGINE") or DEFAULT_ENGINE,
            network=bool(getattr(args, "network", False)),
            verbose=bool(getattr(args, "verbose", False)),
            log_file=Path(log_file) if log_file else None,
        )

    @property
    def report_path(self) -> Path:
        return self.out / "report.yaml"

    @property
    def staging_root(self) -> Path:
        return self.out / "bundles"


def _environment(root: Path) -> dict:
    values = {}
    dotenv_file = root / ".env"
    if dotenv_file.is_file():
        values.update({k: v for k, v in dotenv_values(dotenv_file).items() if v is not None})
    values.update({k: v for k, v in os.environ.items() if k.startswith("VERDAD_")})
    return values


__all__ = ["RunConfig", "RenderMode", "RuntimePolicy", "DEFAULT_OUTPUT_DIR", "VERSION"]
