"""Container execution of staged bundles.

Any engine that follows the usual container CLI contract works
(``<engine> run --rm -v <dir>:/work -w /work <image> ...``); the binary
name is configurable and defaults to ``docker``.
"""
import hashlib
import shutil
import subprocess
import uuid
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

from analysis.manifest import AnalysisManifest
from utils.config import RuntimePolicy
from utils.errors import RuntimeProbeFailed
from utils.logger import logger

WORKDIR = "/work"
PROBE_TIMEOUT = 30


class BundleStatus(str, Enum):
    DISCOVERED = "Discovered"
    RENDERED_ONLY = "RenderedOnly"
    EXECUTED = "Executed"
    OUTPUT_MISSING = "OutputMissing"
    EXEC_FAILED = "ExecFailed"


class ExecResult(NamedTuple):
    exit_code: Optional[int]
    output: str
    timed_out: bool = False


class ContainerRuntime:
    """Thin wrapper over a container engine's command line."""

    def __init__(self, engine: str = "docker"):
        self.engine = engine

    def probe(self) -> bool:
        if shutil.which(self.engine) is None:
            logger.debug(f"Container engine '{self.engine}' not found on PATH")
            return False
        try:
            result = subprocess.run([self.engine, "version"], capture_output=True, timeout=PROBE_TIMEOUT)
        except (OSError, subprocess.SubprocessError) as e:
            logger.debug(f"Probing '{self.engine}' failed: {e}")
            return False
        return result.returncode == 0

    def command_line(self, image: str, workdir: Path, command: Optional[Sequence[str]],
                     network: bool, name: str) -> List[str]:
        argv = [self.engine, "run", "--rm", "--name", name]
        if not network:
            argv += ["--network", "none"]
        argv += ["-v", f"{Path(workdir).resolve()}:{WORKDIR}", "-w", WORKDIR, image]
        return argv + list(command or ())

    def run(self, image: str, workdir: Path, command: Optional[Sequence[str]] = None,
            network: bool = False, timeout: Optional[float] = None, name: str = "verdad") -> ExecResult:
        container = f"verdad-{name}-{uuid.uuid4().hex[:8]}"
        argv = self.command_line(image, workdir, command, network, container)
        logger.debug(f"Executing: {' '.join(argv)}")
        try:
            result = subprocess.run(argv, stdout=subprocess.PIPE, stderr=subprocess.STDOUT, timeout=timeout)
        except subprocess.TimeoutExpired as e:
            subprocess.run([self.engine, "kill", container], capture_output=True)
            output = (e.stdout or b"").decode("utf-8", errors="replace")
            return ExecResult(None, output, timed_out=True)
        except OSError as e:
            return ExecResult(None, str(e))
        return ExecResult(result.returncode, result.stdout.decode("utf-8", errors="replace"))


def resolve_runtime(policy: RuntimePolicy, engine: str = "docker") -> Optional[ContainerRuntime]:
    """The runtime to use, or None when bundles are only rendered.

    Raises:
        RuntimeProbeFailed: ``policy`` is ``required`` and the engine does
            not answer.
    """
    policy = RuntimePolicy(policy)
    if policy == RuntimePolicy.DISABLED:
        return None
    runtime = ContainerRuntime(engine)
    if runtime.probe():
        return runtime
    if policy == RuntimePolicy.REQUIRED:
        raise RuntimeProbeFailed(f"container engine '{engine}' is required but not available", engine=engine)
    logger.info(f"No container engine '{engine}' available; analysis bundles will be rendered only")
    return None


@dataclass
class BundleRun:
    name: str
    staging: Optional[Path]
    status: BundleStatus
    produced: List[Tuple[str, str]] = field(default_factory=list)
    missing_outputs: List[str] = field(default_factory=list)
    exit_code: Optional[int] = None
    log: str = ""
    log_path: Optional[Path] = None
    path: str = ""

    def to_report(self) -> Dict[str, Any]:
        entry: Dict[str, Any] = {"name": self.name, "path": self.path, "status": self.status.value}
        if self.staging is not None:
            entry["staging"] = self.staging.as_posix()
        if self.produced:
            entry["produced"] = [{"path": p, "content_hash": h} for p, h in self.produced]
        if self.missing_outputs:
            entry["missing_outputs"] = list(self.missing_outputs)
        if self.status in (BundleStatus.EXECUTED, BundleStatus.OUTPUT_MISSING, BundleStatus.EXEC_FAILED):
            entry["exit_code"] = self.exit_code
        if self.log_path is not None:
            entry["log"] = self.log_path.as_posix()
        return entry


def _write_log(log_dir: Optional[Path], name: str, text: str) -> Optional[Path]:
    if log_dir is None:
        return None
    log_dir.mkdir(parents=True, exist_ok=True)
    path = log_dir / f"{name}.log"
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    return path


def execute_bundle(staged: Path, manifest: AnalysisManifest, runtime: Optional[Any], *,
                   timeout: Optional[float] = None, network: bool = False,
                   log_dir: Optional[Path] = None) -> BundleRun:
    """Run one staged bundle and check its declared outputs.

    ``runtime`` is anything with :meth:`ContainerRuntime.run`'s signature;
    None means no engine is available and the bundle stays RenderedOnly.
    """
    run = BundleRun(manifest.name, staged, BundleStatus.RENDERED_ONLY, path=manifest.relative)
    if runtime is None:
        return run

    result = runtime.run(manifest.image, staged, manifest.command,
                         network=network or manifest.network,
                         timeout=manifest.timeout or timeout, name=manifest.name)
    run.exit_code = result.exit_code
    run.log = result.output
    if result.timed_out:
        run.log += f"\n[verdad] timed out after {manifest.timeout or timeout} s\n"
    run.log_path = _write_log(log_dir, manifest.name, run.log)

    if result.exit_code != 0:
        run.status = BundleStatus.EXEC_FAILED
        logger.error(f"Bundle '{manifest.name}' failed (exit code {result.exit_code})")
        return run

    for output in manifest.outputs:
        produced = staged / output
        if produced.is_file():
            run.produced.append((output, "sha256:" + hashlib.sha256(produced.read_bytes()).hexdigest()))
        else:
            run.missing_outputs.append(output)
    run.status = BundleStatus.OUTPUT_MISSING if run.missing_outputs else BundleStatus.EXECUTED
    logger.info(f"Bundle '{manifest.name}' finished: {run.status.value}")
    return run


__all__ = [
    "BundleStatus",
    "BundleRun",
    "ExecResult",
    "ContainerRuntime",
    "resolve_runtime",
    "execute_bundle",
]
