import csv
import hashlib
import json
import logging
import os
import sys
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from ..core.errors import ErrorCode, FormatError

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def to_jsonable(value: Any) -> Any:
    """Turn numpy scalars/arrays and enums into plain JSON values"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if hasattr(value, "value") and isinstance(getattr(value, "value"), str):
        return value.value
    return value


class ReportWriter:
    """Writes JSON documents and CSV tables to a file or to stdout"""

    def __init__(self, output: Optional[str] = None):
        self.output = output

    def _open(self):
        if not self.output or self.output == "-":
            return sys.stdout, False
        os.makedirs(os.path.dirname(os.path.abspath(self.output)), exist_ok=True)
        return open(self.output, "w", newline=""), True

    def write_json(self, payload: Dict[str, Any]) -> None:
        stream, owned = self._open()
        try:
            json.dump(to_jsonable(payload), stream, indent=2, sort_keys=False)
            stream.write("\n")
        finally:
            if owned:
                stream.close()

    def write_csv(self, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
        stream, owned = self._open()
        try:
            writer = csv.writer(stream)
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_render(cell) for cell in row])
        finally:
            if owned:
                stream.close()


def _render(cell: Any) -> Any:
    if isinstance(cell, (float, np.floating)):
        return format(float(cell), ".17g")
    if isinstance(cell, np.integer):
        return int(cell)
    return "" if cell is None else cell


def load_json(path: str) -> Dict[str, Any]:
    try:
        with open(path, "r") as f:
            return json.load(f)
    except FileNotFoundError:
        raise FormatError(ErrorCode.FILE_NOT_FOUND, f"file not found: {path}")
    except json.JSONDecodeError as e:
        raise FormatError(ErrorCode.BAD_VALUE, f"{path}: invalid JSON ({e})")


def file_digest(path: str) -> str:
    sha = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            sha.update(chunk)
    return sha.hexdigest()


def write_manifest(out_dir: str, parameters: Dict[str, Any], files: List[str], warnings: List[str]) -> str:
    """Record generator parameters and output digests next to the dataset"""
    manifest = {
        "parameters": to_jsonable(parameters),
        "files": [{"name": os.path.basename(p), "sha256": file_digest(p)} for p in files],
        "warnings": list(warnings),
    }
    path = os.path.join(out_dir, MANIFEST_NAME)
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")
    logger.info(f"Wrote manifest with {len(files)} files to {path}")
    return path
