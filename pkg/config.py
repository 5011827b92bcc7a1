"""
Author: Imran Mughal
Email: imran@mughal.com
Date: October 18, 2026
"""

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from calibrate import DEFAULT_RESOLUTION, DEFAULT_T_MAX, DEFAULT_T_MIN
from data import BlobSpec
from errors import ConfigError
from metrics import DEFAULT_DIAGRAM_BINS, DEFAULT_ECE_BINS
from mlp import TrainConfig

# Load environment variables
load_dotenv()

logger = logging.getLogger(__name__)

LOG_LEVEL = os.getenv("CALIBKIT_LOG_LEVEL", "WARNING")
LEDGER_URL = os.getenv("CALIBKIT_LEDGER_URL", "sqlite:///calibkit_runs.db")
OUTPUT_DIR = os.getenv("CALIBKIT_OUTPUT_DIR", "runs")

DEFAULT_MARGINS = [0.0, 2.0, 4.0, 6.0, 8.0, 10.0]
DEFAULT_MATCHED_WEIGHTS = [0.05, 0.1, 0.2, 0.3]


class DataConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    blobs: Optional[BlobSpec] = Field(default_factory=BlobSpec)
    splits: List[float] = Field(default_factory=lambda: [0.6, 0.2, 0.2])
    split_seed: int = Field(0, ge=0)
    train_path: Optional[str] = None
    val_path: Optional[str] = None
    test_path: Optional[str] = None
    num_classes: Optional[int] = Field(None, ge=2)

    @field_validator("splits")
    @classmethod
    def _check_splits(cls, splits):
        if len(splits) != 3 or min(splits) <= 0 or abs(sum(splits) - 1.0) > 1e-9:
            raise ValueError("splits must be three positive fractions summing to 1")
        return splits


class MetricsConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    ece_bins: int = Field(DEFAULT_ECE_BINS, ge=1)
    diagram_bins: int = Field(DEFAULT_DIAGRAM_BINS, ge=1)


class CalibrationConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    t_min: float = Field(DEFAULT_T_MIN, gt=0.0, le=1.0)
    t_max: float = Field(DEFAULT_T_MAX, ge=1.0)
    resolution: float = Field(DEFAULT_RESOLUTION, gt=0.0)


class SweepConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    margins: List[float] = Field(default_factory=lambda: list(DEFAULT_MARGINS))
    matched_weights: List[float] = Field(default_factory=lambda: list(DEFAULT_MATCHED_WEIGHTS))
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4])
    workers: int = Field(1, ge=1)


class RunConfig(BaseModel):
    """One experiment: data source, training recipe, metric and calibration options."""

    model_config = ConfigDict(extra="forbid")

    data: DataConfig = Field(default_factory=DataConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    metrics: MetricsConfig = Field(default_factory=MetricsConfig)
    calibration: CalibrationConfig = Field(default_factory=CalibrationConfig)
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    output_dir: str = OUTPUT_DIR


def _set_path(document: Dict[str, Any], dotted: str, value: Any):
    keys = dotted.split(".")
    node = document
    for key in keys[:-1]:
        child = node.get(key)
        if child is None:
            child = {}
            node[key] = child
        node = child
    node[keys[-1]] = value


def load_run_config(path: Optional[Union[str, Path]] = None,
                    overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Read a JSON run config and apply dotted-key overrides (flag > file > default).

    Overrides whose value is None are skipped.
    """
    document: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        try:
            with open(path, "r", encoding="utf-8") as f:
                document = json.load(f)
        except FileNotFoundError:
            raise ConfigError(f"Config file not found: {path}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}:{e.lineno}: invalid JSON ({e.msg})")
        if not isinstance(document, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
    for dotted, value in (overrides or {}).items():
        if value is not None:
            _set_path(document, dotted, value)
    try:
        return RunConfig.model_validate(document)
    except ValidationError as e:
        raise ConfigError(f"Invalid run config: {e}")


def dump_run_config(config: RunConfig) -> str:
    return json.dumps(config.model_dump(mode="json", by_alias=True), indent=2, sort_keys=True) + "\n"
