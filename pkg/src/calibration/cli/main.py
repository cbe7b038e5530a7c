"""Command-line front end.

Every subcommand writes a machine-readable document to stdout (or --output)
and diagnostics to stderr. Exit codes: 0 success, 2 input/format or parameter
error, 3 validation or shape error, 4 verification failure.
"""
import argparse
import logging
import os
import sys
from typing import List, Optional, Sequence, Union

import numpy as np
from pydantic import ValidationError

from ..core.binning import BinningScheme
from ..core.config import get_settings
from ..core.constants import (
    CalibrationMode,
    FileFormat,
    Optimizer,
    PredictionKind,
    VERSION,
    WeightSource,
)
from ..core.errors import CalibrationError, ErrorCode, InvalidParameterError, ShapeMismatchError
from ..core.predictions import EnsemblePredictions, LabeledPredictionSet, LogitSet, log_probs, softmax
from ..ensemble.combination import CombinationWeights, combine
from ..ensemble.pipeline import run_combine
from ..metrics.reliability import CURVE_COLUMNS, reliability
from ..metrics.report import evaluate
from ..performance.benchmark import benchmark_operation
from ..persistence.codec import load_ensemble, load_predictions, load_targets, store_predictions
from ..persistence.reports import ReportWriter, load_json, write_manifest
from ..scaling.fitting import FitConfig, fit_dynamic, fit_temperature
from ..scaling.temperature import TemperatureModel
from ..synthlab.distribution import (
    dist_calibration_errors,
    example1_model,
    example3_population_model,
)
from ..synthlab.generators import (
    SynthesisConfig,
    balanced_labels,
    calibrated_member_dataset,
    class_count_warning,
    gen_binned_predictions,
    sample_distribution_model,
)
from ..synthlab.propositions import ALL_PROPOSITIONS, verify_propositions
from ..synthlab.sweep import SWEEP_COLUMNS, epsilon_sweep

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VERIFICATION_FAILED = 4
ALGORITHMS = ("alg1", "alg2", "example1")


# --- argument parsing ---------------------------------------------------

def _bandwidth(value: str) -> Union[float, str]:
    if value == "auto":
        return value
    try:
        return float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f'bandwidth must be a number or "auto", got {value!r}')


def _int_list(value: str) -> List[int]:
    try:
        return [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {value!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="calibration",
        description="Calibration metrics, temperature scaling and ensemble combination",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    io = argparse.ArgumentParser(add_help=False)
    io.add_argument("--format", choices=[f.value for f in FileFormat], help="Override format detection by extension")
    io.add_argument("--output", "-o", help="Output path (default: stdout)")

    truth = argparse.ArgumentParser(add_help=False)
    truth.add_argument("--truth", help="Probability file of true posteriors replacing one-hot labels")

    p = sub.add_parser("metrics", parents=[io, truth], help="Metric report for one prediction file")
    p.add_argument("input")
    p.add_argument("--bins", type=int, help="Fixed-width bin count (default from config)")
    p.add_argument("--exact", action="store_true", help="Exact-value regions instead of fixed-width bins")
    p.add_argument("--skce", action="store_true", help="Also compute the unbiased SKCE")
    p.add_argument("--bandwidth", type=_bandwidth, default="auto", help='SKCE kernel bandwidth or "auto"')
    p.add_argument("--csv", action="store_true", help="Emit a one-row CSV table instead of JSON")

    p = sub.add_parser("fit", parents=[io], help="Fit a temperature model on logits")
    p.add_argument("input")
    p.add_argument("--mode", choices=["global", "dynamic"], default="global")
    p.add_argument("--regions", type=int, help="Region count for --mode dynamic (default from config)")
    p.add_argument("--optimizer", choices=[o.value for o in Optimizer], default=Optimizer.GRID.value)
    p.add_argument("--bins", type=int)
    p.add_argument("--learning-rate", type=float, help="SGD learning rate override")
    p.add_argument("--iterations", type=int, help="SGD iteration override")

    p = sub.add_parser("combine", parents=[io], help="Combine ensemble members")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--weights", choices=[w.value for w in WeightSource], default=WeightSource.UNIFORM.value)
    p.add_argument("--weights-file", help="JSON list of weights for --weights file")
    p.add_argument("--calibrate", choices=[c.value for c in CalibrationMode], default=CalibrationMode.NONE.value)
    p.add_argument("--temp-model", help="Temperature model JSON; fitted on the inputs when omitted")
    p.add_argument("--regions", type=int, help="Region count when fitting for --calibrate dyn")
    p.add_argument("--bins", type=int)
    p.add_argument("--out-preds", help="Where to store the combined predictions")

    p = sub.add_parser("synth", help="Generate a synthetic dataset")
    p.add_argument("--algorithm", choices=ALGORITHMS, default="alg1")
    p.add_argument("--b", type=int, default=2, help="Bin size")
    p.add_argument("--k", type=int, default=4, help="Class count")
    p.add_argument("--m", type=int, default=10, help="Member count")
    p.add_argument("--n", type=int, default=10000, help="Sample count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tau", type=float, default=0.05, help="Example 1 perturbation")
    p.add_argument("--concentration", type=float, default=1.0, help="Dirichlet concentration")
    p.add_argument("--format", choices=[f.value for f in FileFormat], default=FileFormat.BINARY.value)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--output", "-o", help="Summary output path (default: stdout)")

    p = sub.add_parser("verify", parents=[io, truth], help="Check the ensemble propositions")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--props", type=_int_list, default=list(ALL_PROPOSITIONS))
    p.add_argument("--tolerance", type=float, default=1e-9)
    p.add_argument("--weights-file", help="JSON list of weights (default: uniform)")

    p = sub.add_parser("reliability", parents=[io, truth], help="Reliability curve as CSV")
    p.add_argument("input")
    p.add_argument("--bins", type=int)
    p.add_argument("--exact", action="store_true")
    p.add_argument("--include-empty", action="store_true", help="Also emit rows for empty bins")

    p = sub.add_parser("sweep", parents=[io, truth], help="ACE and ECE across bin counts as CSV")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--bins", type=_int_list, default=[15, 10, 5, 2, 1])
    p.add_argument("--members", action="store_true", help="Add one row per member")
    p.add_argument("--exact", action="store_true", help="Add an exact-value row")
    p.add_argument("--weights-file")

    p = sub.add_parser("serve", help="Start the HTTP service")
    p.add_argument("--host", default="0.0.0.0")
    p.add_argument("--port", type=int, default=8000)
    return parser


# --- helpers ------------------------------------------------------------

def _scheme(bins: Optional[int], exact: bool = False) -> BinningScheme:
    if exact:
        return BinningScheme.exact()
    return BinningScheme.fixed(bins or get_settings().bins)


def _as_probabilities(data) -> LabeledPredictionSet:
    if isinstance(data, EnsemblePredictions):
        if data.size > 1:
            logger.info(f"Input holds {data.size} members; evaluating their uniform combination")
        return combine(data.probabilities(), CombinationWeights.uniform(data.size))
    if isinstance(data, LogitSet):
        return softmax(data)
    return data


def _targets(path: Optional[str], preds: Union[LabeledPredictionSet, EnsemblePredictions], fmt):
    if not path:
        return None
    targets = load_targets(path, fmt)
    expected = (preds.n_samples, preds.n_classes)
    if targets.shape != expected:
        raise ShapeMismatchError(f"truth matrix has shape {targets.shape}, predictions {expected}")
    return targets


def _weights(path: Optional[str]) -> Optional[List[float]]:
    if not path:
        return None
    payload = load_json(path)
    if isinstance(payload, dict):
        payload = payload.get("weights")
    if not isinstance(payload, list):
        raise InvalidParameterError(f"{path}: expected a JSON list of weights")
    return payload


def _temperature_model(path: Optional[str]) -> Optional[TemperatureModel]:
    if not path:
        return None
    payload = load_json(path)
    # accept both a bare model and the document written by `fit`
    if isinstance(payload, dict) and "model" in payload:
        payload = payload["model"]
    if not isinstance(payload, dict):
        raise InvalidParameterError(f"{path}: expected a temperature model object")
    return TemperatureModel.from_dict(payload)


# --- subcommands --------------------------------------------------------

def cmd_metrics(args) -> int:
    preds = _as_probabilities(load_predictions(args.input, args.format))
    targets = _targets(args.truth, preds, args.format)
    with benchmark_operation("cli_metrics"):
        report = evaluate(preds, _scheme(args.bins, args.exact), args.skce, args.bandwidth, targets)
    writer = ReportWriter(args.output)
    if args.csv:
        writer.write_csv(report.csv_columns(), [report.csv_row()])
    else:
        writer.write_json(report.model_dump())
    return EXIT_OK


def cmd_fit(args) -> int:
    data = load_predictions(args.input, args.format)
    if isinstance(data, EnsemblePredictions):
        raise InvalidParameterError("fit takes a single model; combine the ensemble first")
    if data.kind == PredictionKind.PROBS:
        logger.info("Input holds probabilities; fitting on their logarithms")
        data = log_probs(data, get_settings().nll_floor)

    config = FitConfig.from_settings(
        optimizer=args.optimizer,
        bins=args.bins,
        learning_rate=args.learning_rate,
        iterations=args.iterations,
    )
    with benchmark_operation(f"cli_fit[{args.mode}]"):
        if args.mode == "dynamic":
            result = fit_dynamic(data, args.regions or get_settings().fit.regions, config)
        else:
            result = fit_temperature(data, config)
    ReportWriter(args.output).write_json(result.to_dict())
    return EXIT_OK


def cmd_combine(args) -> int:
    ens = load_ensemble(args.inputs, args.format)
    source = WeightSource(args.weights)
    explicit = _weights(args.weights_file)
    if source == WeightSource.FILE and explicit is None:
        raise InvalidParameterError("--weights file needs --weights-file")

    outcome = run_combine(
        ens,
        source,
        CalibrationMode(args.calibrate),
        _temperature_model(args.temp_model),
        explicit,
        args.regions,
        _scheme(args.bins),
    )
    payload = outcome.to_dict()
    if args.out_preds:
        store_predictions(outcome.combined, args.out_preds, args.format)
        payload["predictions"] = args.out_preds
    ReportWriter(args.output).write_json(payload)
    return EXIT_OK


def _synth_path(out_dir: str, stem: str, fmt: FileFormat) -> str:
    return os.path.join(out_dir, f"{stem}.{'csv' if fmt == FileFormat.CSV else 'bin'}")


def cmd_synth(args) -> int:
    config = SynthesisConfig(
        bin_size=args.b,
        n_classes=args.k,
        members=args.m,
        samples=args.n,
        seed=args.seed,
        concentration=args.concentration,
    )
    fmt = FileFormat(args.format)
    os.makedirs(args.out_dir, exist_ok=True)
    parameters = {"algorithm": args.algorithm, **config.model_dump()}
    warnings: List[str] = []
    files: List[str] = []

    with benchmark_operation(f"cli_synth[{args.algorithm}]"):
        if args.algorithm == "alg1":
            dataset = calibrated_member_dataset(config)
            for m in range(dataset.ensemble.size):
                path = _synth_path(args.out_dir, f"member_{m + 1:02d}", fmt)
                store_predictions(dataset.ensemble.member(m), path, fmt)
                files.append(path)
            truth = LabeledPredictionSet(dataset.truth, dataset.labels)
        elif args.algorithm == "alg2":
            labels = balanced_labels(config.samples, config.n_classes, config.seed)
            warning = class_count_warning(labels, config.n_classes)
            if warning:
                warnings.append(warning)
            preds = gen_binned_predictions(labels, config)
            path = _synth_path(args.out_dir, "predictions", fmt)
            store_predictions(preds, path, fmt)
            files.append(path)
            truth = LabeledPredictionSet(np.full(preds.probs.shape, 1.0 / config.n_classes), labels)
            if config.bin_size == 2:
                parameters["theoretical"] = dist_calibration_errors(example3_population_model(config.n_classes)).to_dict()
        else:
            model = example1_model(args.tau)
            parameters.update(tau=args.tau, n_classes=model.n_classes)
            parameters["theoretical"] = dist_calibration_errors(model).to_dict()
            dataset = sample_distribution_model(model, config)
            path = _synth_path(args.out_dir, "predictions", fmt)
            store_predictions(dataset.ensemble.member(0), path, fmt)
            files.append(path)
            truth = LabeledPredictionSet(dataset.truth, dataset.labels)

        truth_path = _synth_path(args.out_dir, "truth", fmt)
        store_predictions(truth, truth_path, fmt)
        files.append(truth_path)

    for warning in warnings:
        logger.warning(warning)
    manifest = write_manifest(args.out_dir, parameters, files, warnings)
    ReportWriter(args.output).write_json({"manifest": manifest, "files": files, "warnings": warnings})
    return EXIT_OK


def cmd_verify(args) -> int:
    ens = load_ensemble(args.inputs, args.format)
    targets = _targets(args.truth, ens, args.format)
    explicit = _weights(args.weights_file)
    weights = CombinationWeights(explicit) if explicit is not None else None
    report = verify_propositions(ens, weights, args.tolerance, args.props, targets)
    ReportWriter(args.output).write_json({"passed": report.passed, **report.model_dump()})
    return EXIT_OK if report.passed else EXIT_VERIFICATION_FAILED


def cmd_reliability(args) -> int:
    preds = _as_probabilities(load_predictions(args.input, args.format))
    curve = reliability(preds, _scheme(args.bins, args.exact), _targets(args.truth, preds, args.format))
    ReportWriter(args.output).write_csv(CURVE_COLUMNS, curve.rows(args.include_empty))
    return EXIT_OK


def cmd_sweep(args) -> int:
    ens = load_ensemble(args.inputs, args.format)
    targets = _targets(args.truth, ens, args.format)
    explicit = _weights(args.weights_file)
    weights = CombinationWeights(explicit) if explicit is not None else None
    data = ens if ens.size > 1 else _as_probabilities(ens)
    rows = epsilon_sweep(data, args.bins, weights, args.members, args.exact, targets)
    ReportWriter(args.output).write_csv(SWEEP_COLUMNS, [row.as_list() for row in rows])
    return EXIT_OK


def cmd_serve(args) -> int:
    from ..api.rest_server import start_server

    start_server(args.host, args.port)
    return EXIT_OK


COMMANDS = {
    "metrics": cmd_metrics,
    "fit": cmd_fit,
    "combine": cmd_combine,
    "synth": cmd_synth,
    "verify": cmd_verify,
    "reliability": cmd_reliability,
    "sweep": cmd_sweep,
    "serve": cmd_serve,
}


def _fail(code: str, message: str, exit_code: int) -> int:
    print(f"error[{code}]: {message}", file=sys.stderr)
    return exit_code


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(
        level=os.getenv("LOG_LEVEL", "WARNING").upper(),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
    )
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        return COMMANDS[args.command](args)
    except CalibrationError as e:
        logger.debug("Command failed", exc_info=True)
        return _fail(e.code.value, e.message, e.exit_code)
    except ValidationError as e:
        return _fail(ErrorCode.INVALID_PARAMETER.value, str(e).replace("\n", " "), InvalidParameterError.exit_code)
    except OSError as e:
        return _fail(ErrorCode.FILE_NOT_FOUND.value if isinstance(e, FileNotFoundError) else "io", str(e), 2)


if __name__ == "__main__":
    sys.exit(main())
