"""Environment and file helpers shared by the library, CLI and API."""

import json
import logging
import os
from pathlib import Path
from typing import Any

logger = logging.getLogger(__name__)


def get_env_float(var_name: str, default: float | None) -> float | None:
    """Reads a float from the environment, falling back to default when unset."""
    raw = os.getenv(var_name)
    if raw is None or not raw.strip():
        return default
    try:
        return float(raw)
    except ValueError as exc:
        raise ValueError(f"{var_name} must be a number, got {raw!r}") from exc


def get_env_int(var_name: str, default: int | None) -> int | None:
    """Reads an integer from the environment, falling back to default when unset."""
    raw = os.getenv(var_name)
    if raw is None or not raw.strip():
        return default
    try:
        return int(raw)
    except ValueError as exc:
        raise ValueError(f"{var_name} must be an integer, got {raw!r}") from exc


def load_json_file(path: str | Path) -> dict[str, Any]:
    """Loads a JSON document from disk.

    Raises:
      FileNotFoundError: naming the path when it does not exist.
      ValueError: when the file is not valid JSON.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Spec file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        try:
            document = json.load(f)
        except json.JSONDecodeError as e:
            raise ValueError(f"Error decoding JSON in {path}: {e}") from e
    logger.debug("Loaded %s", path)
    return document
