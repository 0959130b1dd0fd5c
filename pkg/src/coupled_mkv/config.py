"""
Configuration loading for experiment runs.

Documents are read with ``yaml.safe_load`` so JSON and YAML files share one
path. Environment variables supply defaults that a document may override.
"""

import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional

import yaml

from .model import ModelConfig

logger = logging.getLogger(__name__)

# Default configuration values
DEFAULT_OUTPUT_DIR = "results"
DEFAULT_LOG_LEVEL = "INFO"


def load_config_from_path(config_path: str | Path) -> Dict[str, Any]:
    """
    Load a JSON or YAML document from a file path.

    Raises:
        FileNotFoundError: If the file does not exist
        ValueError: If the document is not a mapping
    """
    path = Path(config_path)
    if not path.exists():
        raise FileNotFoundError(f"Configuration file not found: {path}")

    with open(path, "r") as f:
        result = yaml.safe_load(f)
    if not isinstance(result, dict):
        raise ValueError(f"Configuration file {path} must contain a mapping")
    return result


def resolve_model_document(source: Any, base_dir: Optional[Path] = None) -> Dict[str, Any]:
    """
    Return the model document behind an inline mapping or a path to one.

    Relative paths resolve against ``base_dir`` (the experiment file's directory).
    """
    if isinstance(source, dict):
        return source
    if isinstance(source, (str, Path)):
        path = Path(source)
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        logger.debug(f"Loading model document from {path}")
        return load_config_from_path(path)
    raise ValueError("model must be a mapping or a path to a model document")


def load_model(source: Any, base_dir: Optional[Path] = None) -> ModelConfig:
    """Build a ModelConfig from an inline document or a file path."""
    return ModelConfig.from_document(resolve_model_document(source, base_dir))


def default_workers() -> int:
    """Worker-pool size from MKV_WORKERS, else the number of hardware threads."""
    env_workers = os.environ.get("MKV_WORKERS")
    if env_workers:
        try:
            workers = int(env_workers)
            if workers >= 1:
                return workers
        except ValueError:
            pass
        logger.warning(f"Ignoring invalid MKV_WORKERS={env_workers!r}")
    return os.cpu_count() or 1


def default_output_dir() -> Path:
    """Output directory from MKV_OUTPUT_DIR, else ./results."""
    return Path(os.environ.get("MKV_OUTPUT_DIR", DEFAULT_OUTPUT_DIR))


def log_level_from_env() -> int:
    """Logging level named by MKV_LOG_LEVEL (INFO when unset or unknown)."""
    env_log_level = os.environ.get("MKV_LOG_LEVEL", DEFAULT_LOG_LEVEL).upper()
    log_levels = {
        "DEBUG": logging.DEBUG,
        "INFO": logging.INFO,
        "WARNING": logging.WARNING,
        "ERROR": logging.ERROR,
        "CRITICAL": logging.CRITICAL,
    }
    return log_levels.get(env_log_level, logging.INFO)
