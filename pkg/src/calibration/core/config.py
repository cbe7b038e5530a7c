import json
import logging
import os
from functools import lru_cache
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, Field, ValidationError

from .errors import ErrorCode, FormatError

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = Path(__file__).resolve().parents[3] / "config" / "calibration.json"


class FitDefaults(BaseModel):
    t_min: float = Field(0.05, gt=0)
    t_max: float = Field(10.0, gt=1)
    grid_size: int = Field(200, ge=2)
    golden_tolerance: float = Field(1e-7, gt=0)
    scan_resolution: Optional[int] = Field(100000, ge=2)
    refine_candidates: int = Field(8, ge=1)
    sgd_learning_rate: float = Field(0.1, gt=0)
    sgd_iterations: int = Field(400, ge=1)
    dynamic_sweeps: int = Field(3, ge=1)
    regions: int = Field(6, ge=1)


class EnsembleDefaults(BaseModel):
    maxll_step: float = Field(0.5, gt=0)
    maxll_iterations: int = Field(1000, ge=1)
    maxll_tolerance: float = Field(1e-10, ge=0)
    weight_tolerance: float = Field(1e-9, gt=0)


class SkceDefaults(BaseModel):
    bandwidth_sample: int = Field(1000, ge=2)
    max_rows: int = Field(10000, ge=2)
    block_rows: int = Field(256, ge=1)


class ToolkitSettings(BaseModel):
    bins: int = Field(15, ge=1)
    nll_floor: float = Field(1e-12, gt=0)
    fit: FitDefaults = Field(default_factory=FitDefaults)
    ensemble: EnsembleDefaults = Field(default_factory=EnsembleDefaults)
    skce: SkceDefaults = Field(default_factory=SkceDefaults)


def load_settings(path: Optional[str] = None) -> ToolkitSettings:
    """Read settings from `path`, $CALIB_CONFIG, or the bundled config file"""
    target = Path(path or os.environ.get("CALIB_CONFIG") or DEFAULT_CONFIG_PATH)
    if not target.exists():
        if path or os.environ.get("CALIB_CONFIG"):
            raise FormatError(ErrorCode.FILE_NOT_FOUND, f"config file not found: {target}")
        logger.debug(f"No config at {target}, using built-in defaults")
        return ToolkitSettings()
    try:
        with open(target, "r") as f:
            return ToolkitSettings.model_validate(json.load(f))
    except (json.JSONDecodeError, ValidationError) as e:
        raise FormatError(ErrorCode.BAD_VALUE, f"invalid config {target}: {e}")


@lru_cache(maxsize=1)
def get_settings() -> ToolkitSettings:
    return load_settings()
