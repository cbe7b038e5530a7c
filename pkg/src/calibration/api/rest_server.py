import logging
import os
import threading
import time
from datetime import datetime, timezone

import numpy as np
import uvicorn
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware

from ..core.binning import BinningScheme
from ..core.config import get_settings
from ..core.constants import VERSION, WeightSource
from ..core.errors import CalibrationError, InvalidParameterError
from ..core.predictions import EnsemblePredictions, LabeledPredictionSet, LogitSet
from ..ensemble.pipeline import run_combine
from ..metrics.report import MetricReport, evaluate
from ..performance.benchmark import benchmark_operation, perf_tracker
from ..scaling.fitting import FitConfig, fit_dynamic, fit_temperature
from ..scaling.temperature import TemperatureModel
from .schemas import CombineRequest, CombineResponse, FitRequest, FitResponse, HealthResponse, MetricsRequest

logging.basicConfig(
    level=os.getenv("LOG_LEVEL", "INFO").upper(),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

app = FastAPI(
    title="Ensemble Calibration Toolkit",
    description="Calibration metrics, temperature scaling and ensemble combination",
    version=VERSION
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

started_at = time.time()
requests_served = 0
_counter_lock = threading.Lock()


@app.on_event("startup")
async def startup_event():
    """Log startup information"""
    settings = get_settings()
    logger.info("=" * 60)
    logger.info("Ensemble Calibration Toolkit API is starting...")
    logger.info(f"  - Version: {app.version}")
    logger.info(f"  - Default bins: {settings.bins}")
    logger.info("=" * 60)


def _http_error(e: CalibrationError) -> HTTPException:
    # exit code 2 errors map to 400, validation and shape errors to 422
    status = 400 if e.exit_code == 2 else 422
    return HTTPException(status_code=status, detail=e.to_dict())


def _labels(labels) -> np.ndarray:
    return np.asarray(labels, dtype=np.int64) - 1


def _scheme(bins, exact: bool = False) -> BinningScheme:
    if exact:
        return BinningScheme.exact()
    return BinningScheme.fixed(bins or get_settings().bins)


def _count_request() -> None:
    global requests_served
    with _counter_lock:
        requests_served += 1


@app.post("/api/v1/metrics", response_model=MetricReport)
def compute_metrics(request: MetricsRequest):
    """Calibration metrics for one labelled prediction set"""
    _count_request()
    try:
        with benchmark_operation("api_metrics"):
            preds = LabeledPredictionSet(request.probs, _labels(request.labels))
            targets = None
            if request.targets is not None:
                targets = LabeledPredictionSet(request.targets, _labels(request.labels)).probs
            return evaluate(preds, _scheme(request.bins, request.exact), request.skce, request.bandwidth, targets)
    except CalibrationError as e:
        logger.warning(f"Rejected metrics request: {e}")
        raise _http_error(e)


@app.post("/api/v1/fit", response_model=FitResponse)
def fit(request: FitRequest):
    """Fit a global or regional temperature on logits"""
    _count_request()
    try:
        logits = LogitSet(request.logits, _labels(request.labels))
        config = FitConfig.from_settings(optimizer=request.optimizer, bins=request.bins)
        with benchmark_operation(f"api_fit[{request.mode}]"):
            if request.mode == "dynamic":
                result = fit_dynamic(logits, request.regions or get_settings().fit.regions, config)
            else:
                result = fit_temperature(logits, config)
        return result.to_dict()
    except CalibrationError as e:
        logger.warning(f"Rejected fit request: {e}")
        raise _http_error(e)


@app.post("/api/v1/combine", response_model=CombineResponse)
def combine_members(request: CombineRequest):
    """Combine ensemble members, optionally calibrating before or after"""
    _count_request()
    try:
        labels = _labels(request.labels)
        build = LogitSet if request.kind == "logits" else LabeledPredictionSet
        ens = EnsemblePredictions([build(member, labels) for member in request.members])

        if isinstance(request.weights, list):
            source, explicit = WeightSource.FILE, request.weights
        elif request.weights == WeightSource.FILE:
            raise InvalidParameterError("weights 'file' is not available over HTTP; send the weight list")
        else:
            source, explicit = request.weights, None
        model = TemperatureModel.from_dict(request.temperature_model) if request.temperature_model else None

        with benchmark_operation("api_combine"):
            outcome = run_combine(
                ens,
                source,
                request.calibrate,
                model,
                explicit,
                request.regions,
                _scheme(request.bins),
            )
        payload = outcome.to_dict()
        if request.include_probs:
            payload["probs"] = np.asarray(outcome.combined.probs).tolist()
        return payload
    except CalibrationError as e:
        logger.warning(f"Rejected combine request: {e}")
        raise _http_error(e)


@app.get("/api/v1/health", response_model=HealthResponse)
def health_check():
    """System health check"""
    return {
        "status": "healthy",
        "version": app.version,
        "uptime_seconds": time.time() - started_at,
        "requests_served": requests_served,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }


@app.get("/")
def root():
    return {"message": "Ensemble Calibration Toolkit API", "version": app.version}


@app.get("/api/v1/performance")
def get_performance_metrics():
    """Latency summary of tracked operations"""
    return perf_tracker.get_summary()


def start_server(host: str = "0.0.0.0", port: int = 8000):
    """Start the REST API server"""
    logger.info("Starting REST API server...")
    logger.info(f"Server will be available at: http://{host}:{port}")
    logger.info(f"API docs will be available at: http://{host}:{port}/docs")
    logger.info("Press Ctrl+C to stop the server")

    uvicorn.run(
        app,
        host=host,
        port=port,
        log_level=os.getenv("LOG_LEVEL", "info").lower(),
    )


if __name__ == "__main__":
    start_server()
