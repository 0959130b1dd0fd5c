"""
Run context for experiments.

``experiment_context`` owns the worker pool and the output directory of one
run. Every file written through the context is hashed, and on clean exit a
manifest echoing the resolved spec, the package version and those hashes is
written next to them.
"""

import hashlib
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, Sequence

from .formatters import write_csv, write_json

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def file_sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class ExperimentContext:
    """Resources shared by one experiment run."""

    output_dir: Path
    executor: ThreadPoolExecutor
    spec: Dict[str, Any]
    workers: int
    files: Dict[str, str] = field(default_factory=dict)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def path(self, name: str) -> Path:
        return self.output_dir / name

    def record(self, path: Path) -> Path:
        """Register a file written by other means."""
        self.files[path.name] = file_sha256(path)
        logger.debug(f"Wrote {path}")
        return path

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        return self.record(write_csv(self.path(name), header, rows))

    def write_json(self, name: str, data: Any) -> Path:
        return self.record(write_json(self.path(name), data))


@contextmanager
def experiment_context(
    spec: Dict[str, Any], output_dir: Path, workers: int
) -> Iterator[ExperimentContext]:
    """
    Manage the lifecycle of one experiment run.

    Args:
        spec: Resolved experiment spec, echoed into the manifest
        output_dir: Directory receiving every result file
        workers: Worker-pool size

    Yields:
        The run context
    """
    from . import __version__

    start_time = time.time()
    output_dir.mkdir(parents=True, exist_ok=True)
    executor = ThreadPoolExecutor(max_workers=workers, thread_name_prefix="mkv-worker")
    context = ExperimentContext(
        output_dir=output_dir, executor=executor, spec=spec, workers=workers
    )
    logger.info(f"Starting {spec.get('kind')} experiment in {output_dir} ({workers} workers)")
    try:
        yield context
        manifest = {
            "spec": spec,
            "version": __version__,
            "files": dict(sorted(context.files.items())),
        }
        write_json(output_dir / MANIFEST_NAME, manifest)
        logger.info(
            f"Experiment finished in {time.time() - start_time:.1f}s, "
            f"{len(context.files)} files written"
        )
    finally:
        executor.shutdown(wait=True, cancel_futures=True)
