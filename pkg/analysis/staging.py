"""Prepare a bundle's working directory under ``<out>/bundles/<name>/``."""
import os
import shutil
from pathlib import Path
from typing import List

from analysis.manifest import MANIFEST_NAME, AnalysisManifest, bundle_templates
from datamodel.records import KeyPath
from ingest.formats import is_template
from storage.store import Store
from templating.renderer import create_environment, render, resolves, write_output
from utils.config import RenderMode
from utils.errors import MissingInput
from utils.logger import logger


def missing_inputs(manifest: AnalysisManifest, store: Store) -> List[KeyPath]:
    return [key for key in manifest.inputs if not resolves(store, key)]


def stage_bundle(manifest: AnalysisManifest, store: Store, staging_root: Path,
                 mode: RenderMode = RenderMode.STRICT, check_inputs: bool = True) -> Path:
    """Render the bundle's templates and copy its static files into staging.

    The staging directory is recreated from scratch on every call, so a
    rerun never sees files left by an earlier one.

    Args:
        manifest: a validated manifest.
        store: the store the templates render against.
        staging_root: ``<out>/bundles``.
        mode: render mode for the bundle templates.
        check_inputs: when False, unresolved declared inputs are tolerated
            (used for bundles that will not be executed).

    Raises:
        MissingInput: a declared input does not resolve in ``store``.
        RenderError: a bundle template failed to render.
    """
    if check_inputs:
        missing = missing_inputs(manifest, store)
        if missing:
            raise MissingInput(manifest.name, missing)

    staged = Path(staging_root) / manifest.name
    if staged.exists():
        shutil.rmtree(staged)
    staged.mkdir(parents=True)

    source = manifest.path
    for dirpath, dirnames, filenames in os.walk(source):
        current = Path(dirpath)
        dirnames[:] = sorted(d for d in dirnames if not d.startswith("."))
        for name in sorted(filenames):
            path = current / name
            relative = path.relative_to(source)
            if name.startswith(".") or is_template(name) or relative.as_posix() == MANIFEST_NAME:
                continue
            target = staged / relative
            target.parent.mkdir(parents=True, exist_ok=True)
            shutil.copyfile(path, target)
            shutil.copymode(path, target)

    env = create_environment(source, mode)
    for unit in bundle_templates(manifest):
        write_output(staged / unit.output_relative, render(unit, store, mode, env))
    logger.info(f"Staged bundle '{manifest.name}' in {staged}")
    return staged


__all__ = ["stage_bundle", "missing_inputs"]
