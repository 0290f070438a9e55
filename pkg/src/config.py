"""Runtime settings and TOML configuration files."""

from __future__ import annotations

import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import tomli
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.errors import ConfigError
from src.schemas.evaluation import EvaluationSplit, MethodConfig
from src.schemas.synth import SynthConfig

logger = logging.getLogger(__name__)

ENV_PREFIX = "SIGFUSE_"


class Settings(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    threads: int = Field(default=1, ge=1)
    log_level: str = "WARNING"


def load_settings() -> Settings:
    """Settings from SIGFUSE_* environment variables (a .env file is honoured)."""
    load_dotenv()
    raw: Dict[str, Any] = {}
    for name in Settings.model_fields:
        value = os.environ.get(f"{ENV_PREFIX}{name.upper()}")
        if value is not None and value != "":
            raw[name] = value
    try:
        return Settings(**raw)
    except ValidationError as err:
        raise ConfigError(f"invalid {ENV_PREFIX}* environment: {err}") from err


def load_toml(path: str | Path) -> Dict[str, Any]:
    p = Path(path)
    try:
        with open(p, "rb") as f:
            return tomli.load(f)
    except tomli.TOMLDecodeError as err:
        raise ConfigError(f"{p}: not valid TOML: {err}") from err


def load_synth_config(path: str | Path) -> SynthConfig:
    data = load_toml(path)
    try:
        return SynthConfig(**data)
    except ValidationError as err:
        raise ConfigError(f"{path}: invalid synth config: {err}") from err


def load_splits(path: str | Path) -> Tuple[List[EvaluationSplit], Optional[Path]]:
    """``[[split]]`` tables plus the optional ``[accuracy] table`` path.

    Relative paths are resolved against the config file's directory.
    """
    base = Path(path).resolve().parent
    data = load_toml(path)
    unknown = sorted(set(data) - {"split", "accuracy"})
    if unknown:
        raise ConfigError(f"{path}: unknown keys {unknown}")
    rows = data.get("split", [])
    if not rows:
        raise ConfigError(f"{path}: no [[split]] tables")
    splits: List[EvaluationSplit] = []
    try:
        for row in rows:
            split = EvaluationSplit(**row)
            splits.append(
                split.model_copy(update={"gallery": base / split.gallery, "probe": base / split.probe})
            )
    except ValidationError as err:
        raise ConfigError(f"{path}: invalid split: {err}") from err
    names = [s.name for s in splits]
    if len(set(names)) != len(names):
        raise ConfigError(f"{path}: split names must be unique: {names}")

    table: Optional[Path] = None
    acc = data.get("accuracy")
    if acc is not None:
        if set(acc) != {"table"}:
            raise ConfigError(f"{path}: [accuracy] takes exactly one key, 'table'")
        table = base / acc["table"]
    logger.debug("loaded %d splits from %s", len(splits), path)
    return splits, table


def load_methods(path: str | Path) -> List[MethodConfig]:
    data = load_toml(path)
    rows = data.get("method", [])
    if not rows or set(data) != {"method"}:
        raise ConfigError(f"{path}: expected only [[method]] tables")
    try:
        methods = [MethodConfig(**row) for row in rows]
    except ValidationError as err:
        raise ConfigError(f"{path}: invalid method: {err}") from err
    names = [m.name for m in methods]
    if len(set(names)) != len(names):
        raise ConfigError(f"{path}: method names must be unique: {names}")
    return methods
