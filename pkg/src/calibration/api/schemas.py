from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, Field, field_validator

from ..core.constants import CalibrationMode, Optimizer, PredictionKind, WeightSource


def _check_labels(v: List[int]) -> List[int]:
    if any(label < 1 for label in v):
        raise ValueError("Labels are 1-based and must be positive")
    return v


class MetricsRequest(BaseModel):
    probs: List[List[float]] = Field(..., examples=[[[0.8, 0.2], [0.3, 0.7]]])
    labels: List[int] = Field(..., examples=[[1, 2]])
    bins: Optional[int] = Field(None, ge=1, examples=[15])
    exact: bool = False
    skce: bool = False
    bandwidth: Union[float, str] = "auto"
    targets: Optional[List[List[float]]] = None

    @field_validator("labels")
    def validate_labels(cls, v):
        return _check_labels(v)

    @field_validator("bandwidth")
    def validate_bandwidth(cls, v):
        if isinstance(v, str) and v != "auto":
            raise ValueError('Bandwidth must be a positive number or "auto"')
        return v


class FitRequest(BaseModel):
    logits: List[List[float]]
    labels: List[int]
    mode: str = Field("global", examples=["dynamic"])
    regions: Optional[int] = Field(None, ge=1, examples=[6])
    optimizer: Optimizer = Optimizer.GRID
    bins: Optional[int] = Field(None, ge=1)

    @field_validator("labels")
    def validate_labels(cls, v):
        return _check_labels(v)

    @field_validator("mode")
    def validate_mode(cls, v):
        if v.lower() not in ("global", "dynamic"):
            raise ValueError('Mode must be "global" or "dynamic"')
        return v.lower()


class FitResponse(BaseModel):
    model: Dict[str, Any]
    ece: float
    ece_at_t1: float
    optimizer: str
    evaluations: int


class CombineRequest(BaseModel):
    members: List[List[List[float]]] = Field(..., description="M x N x K member outputs")
    labels: List[int]
    kind: PredictionKind = PredictionKind.PROBS
    weights: Union[WeightSource, List[float]] = WeightSource.UNIFORM
    calibrate: CalibrationMode = CalibrationMode.NONE
    temperature_model: Optional[Dict[str, Any]] = None
    regions: Optional[int] = Field(None, ge=1)
    bins: Optional[int] = Field(None, ge=1)
    include_probs: bool = False

    @field_validator("labels")
    def validate_labels(cls, v):
        return _check_labels(v)


class CombineResponse(BaseModel):
    weights: List[float]
    temperature_model: Optional[Dict[str, Any]]
    metrics_before: Dict[str, Any]
    metrics_after: Dict[str, Any]
    probs: Optional[List[List[float]]] = None


class HealthResponse(BaseModel):
    status: str
    version: str
    uptime_seconds: float
    requests_served: int
    timestamp: str
