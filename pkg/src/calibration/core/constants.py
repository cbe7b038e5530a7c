from enum import Enum

class PredictionKind(str, Enum):
    PROBS = "probs"
    LOGITS = "logits"

class BinningMode(str, Enum):
    FIXED_WIDTH = "fixed-width"
    EXACT_VALUE = "exact-value"

class FileFormat(str, Enum):
    CSV = "csv"
    BINARY = "binary"

class TemperatureVariant(str, Enum):
    GLOBAL = "global"
    PER_MEMBER = "per_member"
    REGIONAL = "regional"

class Optimizer(str, Enum):
    GRID = "grid"
    SGD = "sgd"

class CalibrationMode(str, Enum):
    NONE = "none"
    PRE = "pre"
    POST = "post"
    DYNAMIC = "dyn"

class WeightSource(str, Enum):
    UNIFORM = "uniform"
    MAX_LL = "maxll"
    AUC = "auc"
    FILE = "file"

class VerdictStatus(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    PRECONDITION_UNMET = "precondition unmet"
    NO_WITNESS = "no witness"

# Default configuration
DEFAULT_BIN_COUNT = 15
PROBABILITY_FLOOR = 1e-12
ROW_SUM_TOLERANCE = 1e-9
RENORMALIZE_TOLERANCE = 1e-6  # larger row-sum errors are rejected

# Binary container
BINARY_MAGIC = b"CALT"
BINARY_VERSION = 1
BINARY_HEADER_FORMAT = "<4sHBBQII"  # magic, version, kind, reserved, N, K, M

# Service
VERSION = "1.0.0"
