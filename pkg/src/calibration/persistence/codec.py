import csv
import logging
import os
import re
import struct
from typing import List, Optional, Sequence, Union

import numpy as np

from ..core.constants import (
    BINARY_HEADER_FORMAT,
    BINARY_MAGIC,
    BINARY_VERSION,
    FileFormat,
    PredictionKind,
)
from ..core.errors import ErrorCode, FormatError, InvalidParameterError
from ..core.predictions import EnsemblePredictions, LabeledPredictionSet, LogitSet, PredictionData

logger = logging.getLogger(__name__)

HEADER_SIZE = struct.calcsize(BINARY_HEADER_FORMAT)
KIND_CODES = {PredictionKind.PROBS: 0, PredictionKind.LOGITS: 1}
CODE_KINDS = {code: kind for kind, code in KIND_CODES.items()}
COLUMN_PREFIX = {PredictionKind.PROBS: "c", PredictionKind.LOGITS: "z"}
_COLUMN = re.compile(r"^([cpz])(\d+)$")

Loaded = Union[LabeledPredictionSet, LogitSet, EnsemblePredictions]


def resolve_format(path: str, fmt: Optional[Union[str, FileFormat]] = None) -> FileFormat:
    """Explicit format wins; otherwise `.csv` means csv and anything else binary"""
    if fmt is None:
        return FileFormat.CSV if str(path).lower().endswith(".csv") else FileFormat.BINARY
    try:
        return FileFormat(fmt)
    except ValueError:
        raise FormatError(ErrorCode.UNKNOWN_FORMAT, f"unknown format {fmt!r}; expected csv or binary")


def _build(kind: PredictionKind, values: np.ndarray, labels: np.ndarray) -> PredictionData:
    if kind == PredictionKind.PROBS:
        return LabeledPredictionSet(values, labels)
    return LogitSet(values, labels)


def _ensure_parent(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


# --- csv ---------------------------------------------------------------

def _read_csv(path: str) -> PredictionData:
    with open(path, "r", newline="") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise FormatError(ErrorCode.MALFORMED_HEADER, f"{path}: empty file")

    header = [cell.strip() for cell in rows[0]]
    if len(header) < 3 or header[0] != "label":
        raise FormatError(ErrorCode.MALFORMED_HEADER, f"{path}: header must be label,c1..cK or label,z1..zK")
    matches = [_COLUMN.match(cell) for cell in header[1:]]
    prefixes = {m.group(1) for m in matches if m}
    if None in matches or len(prefixes) != 1:
        raise FormatError(ErrorCode.MALFORMED_HEADER, f"{path}: unrecognised columns {header[1:]}")
    if [int(m.group(2)) for m in matches] != list(range(1, len(matches) + 1)):
        raise FormatError(ErrorCode.MALFORMED_HEADER, f"{path}: class columns must be numbered 1..K")
    kind = PredictionKind.LOGITS if prefixes == {"z"} else PredictionKind.PROBS

    k = len(header) - 1
    body = [row for row in rows[1:] if row]
    labels = np.empty(len(body), dtype=np.int64)
    values = np.empty((len(body), k), dtype=np.float64)
    for i, row in enumerate(body):
        if len(row) != k + 1:
            raise FormatError(
                ErrorCode.ROW_LENGTH_MISMATCH, f"{path}: row {i} has {len(row)} fields, expected {k + 1}", row=i
            )
        try:
            labels[i] = int(row[0])
            values[i] = [float(cell) for cell in row[1:]]
        except ValueError:
            raise FormatError(ErrorCode.BAD_VALUE, f"{path}: row {i} has a non-numeric field", row=i)
    return _build(kind, values, labels - 1)


def _write_csv(data: PredictionData, path: str) -> None:
    prefix = COLUMN_PREFIX[data.kind]
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["label"] + [f"{prefix}{j}" for j in range(1, data.n_classes + 1)])
        for label, row in zip(data.labels, data.values):
            writer.writerow([int(label) + 1] + [format(float(v), ".17g") for v in row])


# --- binary ------------------------------------------------------------

def _read_binary(path: str) -> Loaded:
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < HEADER_SIZE:
        raise FormatError(ErrorCode.MALFORMED_HEADER, f"{path}: {len(blob)} bytes is shorter than the header")

    magic, version, kind_code, reserved, n, k, m = struct.unpack_from(BINARY_HEADER_FORMAT, blob)
    if magic != BINARY_MAGIC:
        raise FormatError(ErrorCode.BAD_MAGIC, f"{path}: bad magic {magic!r}")
    if version != BINARY_VERSION:
        raise FormatError(ErrorCode.UNSUPPORTED_VERSION, f"{path}: unsupported version {version}")
    if kind_code not in CODE_KINDS or reserved != 0 or m < 1:
        raise FormatError(ErrorCode.MALFORMED_HEADER, f"{path}: invalid kind/reserved/member fields")

    value_bytes = m * n * k * 8
    expected = HEADER_SIZE + value_bytes + n * 4
    if len(blob) < expected:
        raise FormatError(ErrorCode.TRUNCATED_PAYLOAD, f"{path}: expected {expected} bytes, found {len(blob)}")
    if len(blob) > expected:
        raise FormatError(ErrorCode.BAD_VALUE, f"{path}: {len(blob) - expected} trailing bytes")

    values = np.frombuffer(blob, dtype="<f8", count=m * n * k, offset=HEADER_SIZE).reshape(m, n, k)
    labels = np.frombuffer(blob, dtype="<u4", count=n, offset=HEADER_SIZE + value_bytes).astype(np.int64) - 1
    kind = CODE_KINDS[kind_code]
    members = [_build(kind, values[i].astype(np.float64), labels) for i in range(m)]
    if m == 1:
        return members[0]
    return EnsemblePredictions(members)


def _write_binary(data: Loaded, path: str) -> None:
    if isinstance(data, EnsemblePredictions):
        stack, labels, kind = data.stack, data.labels, data.kind
    else:
        stack, labels, kind = data.values[np.newaxis], data.labels, data.kind
    m, n, k = stack.shape
    header = struct.pack(BINARY_HEADER_FORMAT, BINARY_MAGIC, BINARY_VERSION, KIND_CODES[kind], 0, n, k, m)
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(stack, dtype="<f8").tobytes())
        f.write((np.asarray(labels) + 1).astype("<u4").tobytes())


# --- public ------------------------------------------------------------

def load_predictions(path: str, fmt: Optional[Union[str, FileFormat]] = None) -> Loaded:
    """Read a prediction file; multi-member binary files load as an ensemble"""
    fmt = resolve_format(path, fmt)
    if not os.path.isfile(path):
        raise FormatError(ErrorCode.FILE_NOT_FOUND, f"file not found: {path}")
    data = _read_csv(path) if fmt == FileFormat.CSV else _read_binary(path)
    logger.debug(f"Loaded {data!r} from {path}")
    return data


def store_predictions(data: Loaded, path: str, fmt: Optional[Union[str, FileFormat]] = None) -> None:
    fmt = resolve_format(path, fmt)
    _ensure_parent(path)
    if fmt == FileFormat.CSV:
        if isinstance(data, EnsemblePredictions):
            if data.size != 1:
                raise InvalidParameterError("csv files hold a single member; use the binary format for ensembles")
            data = data.member(0)
        _write_csv(data, path)
    else:
        _write_binary(data, path)
    logger.debug(f"Stored {data!r} to {path}")


def load_ensemble(paths: Sequence[str], fmt: Optional[Union[str, FileFormat]] = None) -> EnsemblePredictions:
    """Concatenate the members of one or more files into one ensemble"""
    members: List[PredictionData] = []
    for path in paths:
        data = load_predictions(path, fmt)
        if isinstance(data, EnsemblePredictions):
            members.extend(data.members)
        else:
            members.append(data)
    return EnsemblePredictions(members)


def load_targets(path: str, fmt: Optional[Union[str, FileFormat]] = None) -> np.ndarray:
    """N x K true-posterior matrix stored as a probability file"""
    data = load_predictions(path, fmt)
    if isinstance(data, EnsemblePredictions):
        data = data.member(0)
    if data.kind != PredictionKind.PROBS:
        raise FormatError(ErrorCode.BAD_VALUE, f"{path}: truth file must hold probabilities")
    return np.asarray(data.probs)
